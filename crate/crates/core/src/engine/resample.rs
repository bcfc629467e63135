//! Rate conversion from the tract step rate to the output rate.

use std::f64::consts::PI;

/// Transposed direct form II biquad.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff: f64, sr: f64, q: f64) -> Self {
        let w = 2.0 * PI * cutoff / sr;
        let alpha = w.sin() / (2.0 * q);
        let cos = w.cos();
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Self {
            b: [0.5 * b1, b1, 0.5 * b1],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            z: [0.0; 2],
        }
    }

    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Fourth-order Butterworth low-pass at `0.45 * output_rate` followed by
/// cubic Hermite interpolation at the output instants. With equal rates it is
/// a pass-through.
#[derive(Debug, Clone)]
pub struct Resampler {
    ratio: f64,
    frac: f64,
    history: [f64; 4],
    filters: Option<[Biquad; 2]>,
}

impl Resampler {
    pub fn new(input_rate: f64, output_rate: f64) -> Self {
        let ratio = input_rate / output_rate;
        let filters = (ratio != 1.0).then(|| {
            let cutoff = (0.45 * output_rate).min(0.45 * input_rate);
            // Butterworth pole pair Qs for order 4
            [
                Biquad::lowpass(cutoff, input_rate, 0.541_196_100_146_197),
                Biquad::lowpass(cutoff, input_rate, 1.306_562_964_876_376_6),
            ]
        });
        Self {
            ratio,
            frac: 0.0,
            history: [0.0; 4],
            filters,
        }
    }

    /// Input samples consumed per output sample.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Produces one output sample, pulling as many inputs from `input` as the
    /// ratio requires.
    #[inline]
    pub fn next(&mut self, mut input: impl FnMut() -> f64) -> f64 {
        let Some(filters) = self.filters.as_mut() else {
            return input();
        };
        let [p0, p1, p2, p3] = self.history;
        let t = self.frac;
        // Catmull-Rom between p1 and p2
        let out = p1
            + 0.5
                * t
                * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
        self.frac += self.ratio;
        while self.frac >= 1.0 {
            self.frac -= 1.0;
            let x = input();
            let mid = filters[0].process(x);
            let y = filters[1].process(mid);
            self.history = [self.history[1], self.history[2], self.history[3], y];
        }
        out
    }
}
