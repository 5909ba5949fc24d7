use hopfbank::bank::{
    bandwidth_to_lyapunov, calibrate_amp_scale, lyapunov_amplitude_rescale, min_bandwidth,
    search_normalize, BandwidthRequest, BankConfig, DetectorBank,
};
use hopfbank::characterize::{measure_bandwidth, RunSettings};
use hopfbank::resonator::effective_frequency;
use hopfbank::signal::{generate_sine, mix_noise};
use hopfbank::{Features, SolverMethod};
use proptest::prelude::*;

const SR: f64 = 48_000.0;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn any_method() -> impl Strategy<Value = SolverMethod> {
    prop_oneof![
        Just(SolverMethod::RungeKutta4),
        Just(SolverMethod::CentralDifference)
    ]
}

fn noisy_tone(f: f64, seconds: f64, seed: u64) -> Vec<f64> {
    let tone = generate_sine(f, seconds, SR, 0.5, 0.3).unwrap();
    mix_noise(&tone, 0.0, seed).unwrap().samples
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn search_normalization_round_trips(f0 in 20.0..2_200.0f64, method in any_method()) {
        let f0 = match method {
            SolverMethod::CentralDifference => f0.min(700.0),
            SolverMethod::RungeKutta4 => f0,
        };
        let adjusted = search_normalize(f0, SR, method).unwrap();
        let back = effective_frequency(method, adjusted, SR).unwrap();
        prop_assert!(((back - f0) / f0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn cubic_law_is_reference_law_rescaled(b in 0.0..100.0f64, x in 0.1..100.0f64) {
        // at the reference forcing amplitude of 25 the law is b = -0.02 B^3
        let at_reference = -0.02 * b.powi(3);
        let composed = lyapunov_amplitude_rescale(at_reference, 25.0, x);
        let direct = bandwidth_to_lyapunov(b, x);
        prop_assert!((composed - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn output_does_not_depend_on_chunking(
        cuts in prop::collection::vec(0usize..24_000, 0..6),
        seed in any::<u64>(),
        method in any_method(),
    ) {
        let features = Features {
            search_normalize: true,
            amplitude_normalize: true,
            amplitude_scale: false,
            frequency_shift: true,
        };
        let cfg = BankConfig::new(SR, method)
            .with_detectors(&[55.0, 440.0, 3000.0, 9000.0], BandwidthRequest::Minimum)
            .with_features(features);
        let input = noisy_tone(440.0, 0.5, seed);
        let whole = DetectorBank::build(cfg.clone()).unwrap().process_complex(&input).unwrap();

        let mut cuts = cuts;
        cuts.sort_unstable();
        let mut bank = DetectorBank::build(cfg).unwrap();
        let mut pieces = Vec::new();
        let mut start = 0;
        for c in cuts.into_iter().chain([input.len()]) {
            pieces.push(bank.process_complex(&input[start..c.max(start)]).unwrap());
            start = c.max(start);
        }
        let mut joined = pieces.remove(0);
        for p in pieces {
            joined.extend(p);
        }
        prop_assert_eq!(&joined.envelopes, &whole.envelopes);
        prop_assert_eq!(&joined.complex, &whole.complex);
    }

    #[test]
    fn degenerate_response_is_linear(seed in any::<u64>(), d in 1e-4..5e-4f64, method in any_method()) {
        let cfg = BankConfig::new(SR, method)
            .with_detectors(&[110.0, 440.0, 1000.0], BandwidthRequest::Minimum)
            .with_damping(d);
        let x = noisy_tone(440.0, 0.25, seed);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = DetectorBank::build(cfg.clone()).unwrap().process(&x).unwrap();
        let b = DetectorBank::build(cfg).unwrap().process(&x2).unwrap();
        for (ea, eb) in a.envelopes.iter().zip(&b.envelopes) {
            for (u, v) in ea.iter().zip(eb) {
                if *u > 0.0 {
                    prop_assert!((v / (2.0 * u) - 1.0).abs() <= 1e-9, "{} vs {}", u, v);
                }
            }
        }
    }

    #[test]
    fn envelopes_are_finite_and_non_negative(
        seed in any::<u64>(),
        bandwidth in 1.0..50.0f64,
        method in any_method(),
    ) {
        let cfg = BankConfig::new(SR, method)
            .with_detectors(&[30.0, 440.0, 5000.0, 20_000.0], BandwidthRequest::Hz(bandwidth))
            .with_features(Features { frequency_shift: true, ..Features::default() });
        let x = noisy_tone(5000.0, 0.2, seed);
        let m = DetectorBank::build(cfg).unwrap().process(&x).unwrap();
        prop_assert!(m.envelopes.iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert_eq!(m.detector_count(), 4);
        prop_assert_eq!(m.len(), x.len());
    }
}

#[test]
fn matched_detector_wins_on_grid() {
    for method in [SolverMethod::RungeKutta4, SolverMethod::CentralDifference] {
        let grid: Vec<f64> = (0..36).map(|k| 55.0 * 2f64.powf(k as f64 / 12.0)).collect();
        let cfg = BankConfig::new(SR, method)
            .with_detectors(&grid, BandwidthRequest::Minimum)
            .with_features(Features {
                frequency_shift: true,
                ..Features::default()
            });
        for (i, &f) in grid.iter().enumerate() {
            let tone = generate_sine(f, 0.5, SR, 1.0, 0.0).unwrap();
            let m = DetectorBank::build(cfg.clone())
                .unwrap()
                .process(&tone.samples)
                .unwrap();
            assert_eq!(m.argmax_detector(), Some(i), "{method} at {f} Hz");
        }
    }
}

#[test]
fn configured_bandwidth_is_realized() {
    let settings = RunSettings::new(SR, SolverMethod::RungeKutta4).with_gain(25.0);
    let lowest = 2.0 * min_bandwidth(1e-4, SR).unwrap();
    for b in [lowest, 5.0, 20.0, 50.0, 100.0] {
        let m = measure_bandwidth(&settings, 1000.0, BandwidthRequest::Hz(b), None).unwrap();
        assert!(
            (m.bandwidth_hz / b - 1.0).abs() <= 0.15,
            "{b} Hz measured {}",
            m.bandwidth_hz
        );
    }
}

#[test]
fn unnormalized_gains_grow_with_frequency() {
    let grid: Vec<f64> = (0..8)
        .map(|k| 1000.0 * 2f64.powf(k as f64 / 12.0))
        .collect();
    let table = calibrate_amp_scale(&grid, SR, SolverMethod::RungeKutta4, false).unwrap();
    let gains: Vec<f64> = table.entries.iter().map(|e| e.1).collect();
    assert!(gains.windows(2).all(|w| w[1] >= w[0]), "{gains:?}");
}
