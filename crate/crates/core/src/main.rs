use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use tract_forge::analysis::{estimate_formants, MAX_FORMANTS};
use tract_forge::engine::{concat, Engine, EngineConfig, DEFAULT_SAMPLE_RATE};
use tract_forge::geometry::PalateCurve;
use tract_forge::glottis::{GlottalControls, MAX_F0, MIN_F0};
use tract_forge::io;
use tract_forge::kinematics::{calibrate, ChannelLayout};
use tract_forge::server::{self, ServeOptions};

const SEED_ENV: &str = "TRACT_FORGE_SEED";

#[derive(Parser)]
#[command(name = "tract-forge", version, about = "Gesture-driven articulatory speech synthesizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a recorded gesture file to a 16-bit mono WAV.
    Render {
        gesture: PathBuf,
        /// Per-channel min/max JSON from `calibrate`.
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Channel layout JSON; defaults to fingertips 2,5,8,11,14, flexion 15, deviation 16.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Noise seed; TRACT_FORGE_SEED takes precedence when set.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE, value_parser = sample_rate)]
        sr: u32,
        #[arg(long, default_value_t = GlottalControls::default().f0)]
        f0: f64,
        #[arg(long, default_value_t = GlottalControls::default().tenseness)]
        tenseness: f64,
        /// Turn voicing off (noise only).
        #[arg(long)]
        unvoiced: bool,
        /// Palate override CSV (`x_cm,y_cm`).
        #[arg(long)]
        palate: Option<PathBuf>,
        /// Also write the per-block area functions as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Estimate formants of a WAV file and print them as JSON.
    Analyze {
        wav: PathBuf,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=MAX_FORMANTS as i64))]
        formants: u8,
    },
    /// Derive per-channel calibration from a raw sweep recording.
    Calibrate {
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the live control protocol over WebSocket at /ws.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE, value_parser = sample_rate)]
        sr: u32,
        /// Base seed for per-session engines; TRACT_FORGE_SEED takes precedence.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory of UI files to serve at /.
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn sample_rate(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(sr) if io::SUPPORTED_SAMPLE_RATES.contains(&sr) => Ok(sr),
        _ => Err(format!("expected one of {:?}", io::SUPPORTED_SAMPLE_RATES)),
    }
}

/// Carries the exit code with the message.
enum Failure {
    Usage(String),
    Internal(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::Internal(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Render {
            gesture,
            calib,
            layout,
            out,
            seed,
            sr,
            f0,
            tenseness,
            unvoiced,
            palate,
            trace,
        } => {
            let glottal = GlottalControls {
                f0,
                tenseness,
                voiced: !unvoiced,
            };
            if !(MIN_F0..=MAX_F0).contains(&f0) || !(0.0..=1.0).contains(&tenseness) {
                return Err(Failure::Usage(format!(
                    "--f0 must be in [{MIN_F0}, {MAX_F0}] and --tenseness in [0, 1]"
                )));
            }
            let frames = io::read_gesture_csv(&gesture).map_err(Failure::usage)?;
            let calib = calib
                .as_deref()
                .map(io::read_calibration)
                .transpose()
                .map_err(Failure::usage)?;
            let layout = match layout {
                Some(p) => io::read_layout(&p).map_err(Failure::usage)?,
                None => ChannelLayout::default(),
            };
            let palate = palate
                .as_deref()
                .map(|p| {
                    PalateCurve::from_csv_path(p)
                        .map(Arc::new)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
                })
                .transpose()?;

            let config = EngineConfig {
                sample_rate: sr,
                seed: resolve_seed(seed)?,
                palate,
                ..EngineConfig::default()
            };
            let mut engine = Engine::new(config).map_err(Failure::usage)?;
            let blocks = engine
                .replay(&frames, calib.as_ref(), &layout, glottal)
                .map_err(|e| Failure::Usage(format!("{}: {e}", gesture.display())))?;
            let samples = concat(&blocks);
            io::write_wav(&out, &samples, sr).map_err(Failure::usage)?;
            if let Some(t) = trace {
                io::write_area_trace(&t, &blocks).map_err(Failure::usage)?;
            }

            let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            println!(
                "wrote {}: {:.3} s, peak {:.4} ({:.1} dBFS)",
                out.display(),
                samples.len() as f64 / sr as f64,
                peak,
                20.0 * peak.max(1e-10).log10()
            );
            Ok(())
        }
        Command::Analyze { wav, formants } => {
            let audio = io::read_wav(&wav).map_err(|e| Failure::Usage(format!("{}: {e}", wav.display())))?;
            let count = formants as usize;
            let est = estimate_formants(&audio.samples, audio.sample_rate as f64, count.max(2))
                .map_err(|e| Failure::Usage(format!("{}: {e}", wav.display())))?;
            let mut report = json!({
                "f1_hz": est.frequency(0),
                "f2_hz": est.frequency(1),
                "frames": est.frames,
            });
            if count > 2 {
                report["formants"] = json!(est.formants.iter().take(count).collect::<Vec<_>>());
            }
            println!("{report}");
            Ok(())
        }
        Command::Calibrate { raw, out } => {
            let frames = io::read_gesture_csv(&raw).map_err(Failure::usage)?;
            let calib = calibrate(&frames).map_err(|e| Failure::Usage(format!("{}: {e}", raw.display())))?;
            io::write_calibration(&out, &calib).map_err(Failure::usage)?;
            println!("wrote {} from {} frames", out.display(), frames.len());
            Ok(())
        }
        Command::Serve {
            port,
            sr,
            seed,
            assets,
            host,
        } => {
            if let Some(dir) = &assets {
                if !dir.is_dir() {
                    return Err(Failure::Usage(format!("{}: not a directory", dir.display())));
                }
            }
            let options = ServeOptions {
                config: EngineConfig {
                    sample_rate: sr,
                    ..EngineConfig::default()
                },
                seed: resolve_seed(seed)?,
                assets,
            };
            serve(&host, port, options)
        }
    }
}

fn serve(host: &str, port: u16, options: ServeOptions) -> Result<(), Failure> {
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::internal)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::Usage(format!("cannot listen on {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(Failure::internal)?;
        println!("listening on http://{addr} (WebSocket at /ws)");
        server::serve(listener, options).await.map_err(Failure::internal)
    })
}

fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(Failure::Usage(format!("{SEED_ENV}: {e}"))),
    }
}
