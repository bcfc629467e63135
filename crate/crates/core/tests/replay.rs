use tract_forge::analysis::estimate_formants;
use tract_forge::area::ConstrictionClass;
use tract_forge::engine::{concat, ControlSnapshot, Engine, EngineConfig, EngineError};
use tract_forge::glottis::GlottalControls;
use tract_forge::io::parse_gesture_csv;
use tract_forge::kinematics::{frame_to_articulation, normalize_frame, Calibration, ChannelLayout, SensorFrame, CHANNELS};
use tract_forge::presets::Vowel;

/// Raw frame that the unit calibration and default layout map onto `(r, theta, fingers)`.
fn frame(t_ms: f64, r: f64, theta: f64, fingers: [f64; 5]) -> SensorFrame {
    let layout = ChannelLayout::default();
    let mut ch = [0.0; CHANNELS];
    ch[layout.flexion] = r;
    ch[layout.deviation] = 0.5 * (theta + 1.0);
    for (c, f) in layout.fingertips.iter().zip(fingers) {
        ch[*c] = f;
    }
    SensorFrame::new(t_ms, ch)
}

fn replay(frames: &[SensorFrame]) -> Vec<tract_forge::engine::AudioBlock> {
    let mut engine = Engine::new(EngineConfig::default()).unwrap();
    engine
        .replay(frames, Some(&Calibration::unit()), &ChannelLayout::default(), GlottalControls::default())
        .unwrap()
}

#[test]
fn frame_helper_round_trips_through_kinematics() {
    let f = frame(0.0, 0.25, -0.5, [0.1, 0.2, 0.3, 0.4, 0.5]);
    let s = frame_to_articulation(&normalize_frame(&f, &Calibration::unit()), &ChannelLayout::default()).unwrap();
    assert_eq!((s.r, s.theta, s.fingers), (0.25, -0.5, [0.1, 0.2, 0.3, 0.4, 0.5]));
}

#[test]
fn duration_is_last_timestamp_rounded_up_to_blocks() {
    for last in [1.0, 10.0, 500.0, 1000.0, 1234.5] {
        let frames = [frame(0.0, 0.5, 0.0, [0.0; 5]), frame(last, 0.5, 0.0, [0.0; 5])];
        let samples = concat(&replay(&frames)).len();
        let want = (last * 48.0 / 512.0).ceil() as usize * 512;
        assert_eq!(samples, want, "{last} ms");
        assert!((samples as f64 / 48.0 - last).abs() <= 512.0 / 48.0);
    }
    // a single frame at t = 0 still yields one block
    assert_eq!(concat(&replay(&[frame(0.0, 0.5, 0.0, [0.0; 5])])).len(), 512);
}

#[test]
fn constant_gesture_matches_live_rendering() {
    let state = Vowel::A.state();
    let frames: Vec<SensorFrame> = (0..=80).map(|i| frame(10.0 * i as f64, state.r, state.theta, state.fingers)).collect();
    let replayed = concat(&replay(&frames));

    let mut engine = Engine::new(EngineConfig::default()).unwrap();
    engine.push_control(ControlSnapshot::new(state, GlottalControls::default()));
    let live = concat(&engine.render(replayed.len() / 512));

    let tail = 9_600..replayed.len();
    let a = estimate_formants(&replayed[tail.clone()], 48_000.0, 2).unwrap();
    let b = estimate_formants(&live[tail], 48_000.0, 2).unwrap();
    for k in 0..2 {
        let (x, y) = (a.frequency(k).unwrap(), b.frequency(k).unwrap());
        assert!((x / y - 1.0).abs() < 0.01, "F{}: replay {x} live {y}", k + 1);
    }
    assert_eq!(replayed, live, "same controls and seed render the same samples");
}

#[test]
fn frames_hold_until_the_next_timestamp() {
    let blocks = replay(&[
        frame(0.0, 0.5, 0.0, [0.0; 5]),
        frame(400.0, 0.5, 0.0, [1.0, 0.0, 0.0, 0.0, 0.0]),
        frame(800.0, 0.5, 0.0, [1.0, 0.0, 0.0, 0.0, 0.0]),
    ]);
    for b in &blocks {
        let class = b.constriction.class;
        if b.t_ms < 400.0 {
            assert_eq!(class, ConstrictionClass::Open, "{} ms", b.t_ms);
        } else if b.t_ms > 500.0 {
            assert_eq!(class, ConstrictionClass::Occluded, "{} ms", b.t_ms);
        }
    }
}

#[test]
fn slow_sweeps_do_not_click() {
    let frames: Vec<SensorFrame> = (0..=300)
        .map(|i| {
            let t = i as f64 / 300.0;
            let wave = |k: f64, p: f64| 0.5 + 0.5 * (2.0 * std::f64::consts::PI * k * t + p).sin();
            frame(
                10.0 * i as f64,
                wave(1.0, 0.0),
                2.0 * wave(0.7, 1.0) - 1.0,
                std::array::from_fn(|f| wave(1.3, f as f64)),
            )
        })
        .collect();
    let x = concat(&replay(&frames));
    let jump = x.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(jump <= 0.5, "largest step {jump}");
    assert!(x.iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn errors() {
    let mut engine = Engine::new(EngineConfig::default()).unwrap();
    let frames = [frame(0.0, 0.5, 0.0, [0.0; 5])];
    let layout = ChannelLayout::default();
    let g = GlottalControls::default();
    assert!(matches!(engine.replay(&frames, None, &layout, g), Err(EngineError::CalibrationMissing)));
    assert!(matches!(
        engine.replay(&[], Some(&Calibration::unit()), &layout, g),
        Err(EngineError::EmptyGesture)
    ));
    assert!(parse_gesture_csv("").is_err());
}
