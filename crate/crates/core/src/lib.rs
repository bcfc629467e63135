//! Hand-gesture driven articulatory speech synthesis.
//!
//! Glove frames become an articulatory state ([`kinematics`]), the state
//! shapes a tongue spline under a fixed palate ([`geometry`]), the gap between
//! the two becomes an area function ([`area`]), and a Kelly-Lochbaum waveguide
//! ([`waveguide`]) excited by an LF glottal source ([`glottis`]) turns it into
//! audio. [`engine`] ties the stages together for block rendering;
//! [`analysis`] measures spectra and formants of the result, [`io`] reads
//! and writes the file formats, and [`server`] streams a live session over
//! WebSocket using the [`protocol`] messages.

// NaN-rejecting range checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod area;
pub mod engine;
pub mod geometry;
pub mod glottis;
pub mod io;
pub mod kinematics;
pub mod presets;
pub mod protocol;
pub mod server;
pub mod waveguide;
