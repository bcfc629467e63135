use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tract_forge::analysis::estimate_formants;
use tract_forge::io::{gesture_csv, read_wav, write_calibration, write_wav};
use tract_forge::kinematics::{Calibration, SensorFrame, CHANNELS};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tract-forge"));
    c.env_remove("TRACT_FORGE_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Neutral posture under the unit calibration, `ms` long at 10 ms frames.
fn neutral_gesture(dir: &Path, ms: usize) -> (PathBuf, PathBuf) {
    let frames: Vec<SensorFrame> = (0..=ms / 10)
        .map(|i| {
            let mut ch = [0.0; CHANNELS];
            ch[15] = 0.5;
            ch[16] = 0.5;
            SensorFrame::new(10.0 * i as f64, ch)
        })
        .collect();
    let gesture = dir.join("gesture.csv");
    let calib = dir.join("calib.json");
    std::fs::write(&gesture, gesture_csv(&frames)).unwrap();
    write_calibration(&calib, &Calibration::unit()).unwrap();
    (gesture, calib)
}

fn render(gesture: &Path, calib: &Path, out: &Path, extra: &[&str]) -> Output {
    run(bin()
        .arg("render")
        .arg(gesture)
        .arg("--calib")
        .arg(calib)
        .arg("--out")
        .arg(out)
        .args(extra))
}

#[test]
fn one_second_gesture_renders_one_second() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 1000);
    let out = dir.path().join("out.wav");
    let result = render(&gesture, &calib, &out, &[]);
    assert!(result.status.success(), "{}", stderr(&result));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("peak") && stdout.contains(" s,"), "{stdout}");

    let audio = read_wav(&out).unwrap();
    assert_eq!(audio.sample_rate, 48_000);
    let seconds = audio.samples.len() as f64 / 48_000.0;
    assert!((seconds - 1.0).abs() <= 512.0 / 48_000.0, "{seconds}");
    assert!(audio.samples.iter().any(|&s| s != 0.0));
}

#[test]
fn sample_rate_flag_selects_44100() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 500);
    let out = dir.path().join("out.wav");
    let result = render(&gesture, &calib, &out, &["--sr", "44100"]);
    assert!(result.status.success(), "{}", stderr(&result));
    let audio = read_wav(&out).unwrap();
    assert_eq!(audio.sample_rate, 44_100);
    assert!((audio.samples.len() as f64 / 44_100.0 - 0.5).abs() <= 512.0 / 44_100.0);

    let bad = render(&gesture, &calib, &out, &["--sr", "22050"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes_and_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 300);
    let path = |n: &str| dir.path().join(n);
    for (name, seed) in [("a.wav", "5"), ("b.wav", "5"), ("c.wav", "6")] {
        assert!(render(&gesture, &calib, &path(name), &["--seed", seed]).status.success());
    }
    let read = |n: &str| std::fs::read(path(n)).unwrap();
    assert_eq!(read("a.wav"), read("b.wav"));
    assert_ne!(read("a.wav"), read("c.wav"));

    let env = run(bin()
        .env("TRACT_FORGE_SEED", "5")
        .arg("render")
        .arg(&gesture)
        .arg("--calib")
        .arg(&calib)
        .arg("--out")
        .arg(path("d.wav"))
        .args(["--seed", "6"]));
    assert!(env.status.success());
    assert_eq!(read("d.wav"), read("a.wav"));

    let junk = run(bin().env("TRACT_FORGE_SEED", "x").arg("render").arg(&gesture).arg("--calib").arg(&calib).arg("--out").arg(path("e.wav")));
    assert_eq!(junk.status.code(), Some(2));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (_, calib) = neutral_gesture(dir.path(), 100);
    let missing = dir.path().join("nowhere.csv");
    let result = render(&missing, &calib, &dir.path().join("o.wav"), &[]);
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("nowhere.csv"), "{}", stderr(&result));
}

#[test]
fn parse_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 100);
    let mut text = std::fs::read_to_string(&gesture).unwrap();
    text.push_str("200,1,2,oops\n");
    std::fs::write(&gesture, text).unwrap();
    let result = render(&gesture, &calib, &dir.path().join("o.wav"), &[]);
    assert_eq!(result.status.code(), Some(2));
    let err = stderr(&result);
    assert!(err.contains("line 13"), "{err}");

    std::fs::write(&gesture, "").unwrap();
    let empty = render(&gesture, &calib, &dir.path().join("o.wav"), &[]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(stderr(&empty).contains("line 1"));
}

#[test]
fn render_without_calibration_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, _) = neutral_gesture(dir.path(), 100);
    let result = run(bin().arg("render").arg(&gesture).arg("--out").arg(dir.path().join("o.wav")));
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains("calibration"));
}

#[test]
fn render_writes_area_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 200);
    let trace = dir.path().join("trace.csv");
    let result = render(&gesture, &calib, &dir.path().join("o.wav"), &["--trace", trace.to_str().unwrap()]);
    assert!(result.status.success());
    let text = std::fs::read_to_string(trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("t_ms,a_0,") && lines[0].ends_with(",a_43"));
    // 200 ms rounds up to 19 blocks
    assert_eq!(lines.len(), 1 + 19);
}

#[test]
fn render_then_analyze_orders_formants() {
    let dir = tempfile::tempdir().unwrap();
    let (gesture, calib) = neutral_gesture(dir.path(), 800);
    let wav = dir.path().join("neutral.wav");
    assert!(render(&gesture, &calib, &wav, &[]).status.success());
    let result = run(bin().arg("analyze").arg(&wav));
    assert!(result.status.success(), "{}", stderr(&result));
    let v: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    let (f1, f2) = (v["f1_hz"].as_f64().unwrap(), v["f2_hz"].as_f64().unwrap());
    assert!(f1 > 0.0 && f1 < f2, "{v}");
    assert!(v["frames"].as_u64().unwrap() > 0);
    assert_eq!(v.as_object().unwrap().len(), 3);

    let more = run(bin().arg("analyze").arg(&wav).args(["--formants", "4"]));
    let v: serde_json::Value = serde_json::from_slice(&more.stdout).unwrap();
    assert_eq!(v["formants"].as_array().unwrap().len(), 4);
}

#[test]
fn analyze_matches_the_library_on_a_resonator() {
    let sr = 48_000.0;
    let mut x: Vec<f64> = (0..24_000).map(|i| if i % 400 == 0 { 1.0 } else { 0.0 }).collect();
    for f in [700.0, 1800.0] {
        let r: f64 = (-PI * 80.0 / sr).exp();
        let (c1, c2) = (2.0 * r * (2.0 * PI * f / sr).cos(), -r * r);
        let (mut y1, mut y2) = (0.0, 0.0);
        for s in x.iter_mut() {
            let y = *s + c1 * y1 + c2 * y2;
            y2 = y1;
            y1 = y;
            *s = y;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v *= 0.8 / peak);

    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("res.wav");
    write_wav(&wav, &x, 48_000).unwrap();
    let result = run(bin().arg("analyze").arg(&wav));
    assert!(result.status.success());
    let v: serde_json::Value = serde_json::from_slice(&result.stdout).unwrap();
    let (f1, f2) = (v["f1_hz"].as_f64().unwrap(), v["f2_hz"].as_f64().unwrap());
    assert!((f1 / 700.0 - 1.0).abs() < 0.03 && (f2 / 1800.0 - 1.0).abs() < 0.03, "{v}");

    let lib = estimate_formants(&read_wav(&wav).unwrap().samples, sr, 2).unwrap();
    assert_eq!(lib.frequency(0), Some(f1));
    assert_eq!(lib.frequency(1), Some(f2));
}

#[test]
fn analyze_rejects_corrupt_wav() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("bad.wav");
    write_wav(&wav, &[0.1; 4800], 48_000).unwrap();
    let mut bytes = std::fs::read(&wav).unwrap();
    bytes[0..4].copy_from_slice(b"RIFX");
    bytes[8..12].copy_from_slice(b"JUNK");
    std::fs::write(&wav, bytes).unwrap();
    assert_eq!(run(bin().arg("analyze").arg(&wav)).status.code(), Some(2));
    assert_eq!(run(bin().arg("analyze").arg(dir.path().join("none.wav"))).status.code(), Some(2));
}

#[test]
fn calibrate_writes_ranges_and_names_dead_channels() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<SensorFrame> = (0..20)
        .map(|i| SensorFrame::new(i as f64 * 10.0, std::array::from_fn(|c| 100.0 + (i * (c + 1)) as f64)))
        .collect();
    let raw = dir.path().join("raw.csv");
    std::fs::write(&raw, gesture_csv(&frames)).unwrap();
    let out = dir.path().join("calib.json");
    let result = run(bin().arg("calibrate").arg(&raw).arg("--out").arg(&out));
    assert!(result.status.success(), "{}", stderr(&result));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["min"].as_array().unwrap().len(), CHANNELS);
    assert_eq!(v["min"][3].as_f64(), Some(100.0));
    assert_eq!(v["max"][3].as_f64(), Some(100.0 + 19.0 * 4.0));

    let dead: Vec<SensorFrame> = frames
        .iter()
        .map(|f| {
            let mut f = *f;
            f.channels[4] = 7.0;
            f.channels[9] = 7.0;
            f
        })
        .collect();
    std::fs::write(&raw, gesture_csv(&dead)).unwrap();
    let result = run(bin().arg("calibrate").arg(&raw).arg("--out").arg(&out));
    assert_eq!(result.status.code(), Some(2));
    let err = stderr(&result);
    assert!(err.contains("s5") && err.contains("s10"), "{err}");
}

#[test]
fn serve_exits_2_when_port_is_busy() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let result = run(bin().args(["serve", "--port", &port]));
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr(&result).contains(&port));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&mut bin()).status.code(), Some(2));
    assert_eq!(run(bin().arg("bogus")).status.code(), Some(2));
    assert_eq!(run(bin().args(["analyze", "x.wav", "--formants", "9"])).status.code(), Some(2));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}
