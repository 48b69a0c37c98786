use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telegraph::grape::{
    fidelity_gradient, optimize_multistart, optimize_pulse, standard_starts, BlochProblem, OptimizationConfig,
};
use telegraph::noise::RtnSpec;
use telegraph::pulse::{ControlPulse, Segment};

fn random_pulse(rng: &mut ChaCha8Rng, n: usize, total: f64) -> ControlPulse {
    let amps: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ControlPulse::uniform(&amps, total, 1.0).unwrap()
}

fn central_difference(prob: &BlochProblem, pulse: &ControlPulse, h: f64) -> Vec<f64> {
    let amps = pulse.amplitudes();
    (0..amps.len())
        .map(|k| {
            let eval = |shift: f64| {
                let mut a = amps.clone();
                a[k] += shift;
                // finite differences may leave the box; evaluate the raw segments
                let segs = pulse
                    .segments()
                    .iter()
                    .zip(&a)
                    .map(|(s, &amp)| Segment { duration: s.duration, amplitude: amp })
                    .collect();
                prob.fidelity(&ControlPulse::new(segs, 2.0).unwrap()).unwrap()
            };
            (eval(h) - eval(-h)) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let spec = RtnSpec::new(rng.random_range(0.05..0.4), 10f64.powf(rng.random_range(-1.0..2.0))).unwrap();
        let prob = BlochProblem::not_gate(&spec).unwrap();
        let pulse = random_pulse(&mut rng, 64, 7.0 * PI / 3.0);
        let (_, grad) = prob.fidelity_gradient(&pulse).unwrap();
        let fd = central_difference(&prob, &pulse, 1e-5);
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&grad);
        assert!(rel < 1e-6, "relative error {rel:e}");
    }
}

#[test]
fn gradient_vanishes_at_noiseless_optimum() {
    let spec = RtnSpec::new(0.0, 1.0).unwrap();
    let pulse = ControlPulse::uniform(&[0.5; 64], 2.0 * PI, 1.0).unwrap();
    let g = fidelity_gradient(&pulse, &spec).unwrap();
    assert!(norm(&g) < 1e-8);
}

#[test]
fn time_reversal_reverses_gradient() {
    // reversing time and swapping the noise states leaves the symmetric
    // telegraph problem invariant
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = RtnSpec::new(0.2, 3.0).unwrap();
    let prob = BlochProblem::not_gate(&spec).unwrap();
    let pulse = random_pulse(&mut rng, 32, 6.0);
    let (f, g) = prob.fidelity_gradient(&pulse).unwrap();
    let (fr, mut gr) = prob.fidelity_gradient(&pulse.reversed()).unwrap();
    gr.reverse();
    assert!((f - fr).abs() < 1e-13);
    let diff: Vec<f64> = g.iter().zip(&gr).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) < 1e-12 * norm(&g).max(1.0));
}

#[test]
fn noiseless_problem_reaches_unit_fidelity() {
    let cfg = OptimizationConfig { delta: 0.0, tau_c: 1.0, ..Default::default() };
    let start = ControlPulse::uniform(&[0.3; 64], cfg.total_time, 1.0).unwrap();
    let res = optimize_pulse(&OptimizationConfig { initial: Some(start), ..cfg }).unwrap();
    assert!(res.fidelity >= 1.0 - 1e-9, "{}", res.fidelity);
}

#[test]
fn history_is_monotone_and_bounded() {
    let cfg = OptimizationConfig { delta: 0.25, tau_c: 20.0, max_iters: 300, ..Default::default() };
    let res = optimize_pulse(&cfg).unwrap();
    assert!(res.fidelity_history.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(res.fidelity, *res.fidelity_history.last().unwrap());
    assert!(res.pulse.amplitudes().iter().all(|a| a.abs() <= 1.0));
    assert_eq!(res.pulse.len(), 64);
    let again = optimize_pulse(&cfg).unwrap();
    assert_eq!(res, again);
}

#[test]
fn optimized_shapes_follow_correlation_time() {
    for (tau, check) in [(5.0, 0usize), (50.0, 1)] {
        let cfg = OptimizationConfig { delta: 0.125, tau_c: tau, ..Default::default() };
        let (_, best) = optimize_multistart(&cfg, &standard_starts(&cfg).unwrap()).unwrap();
        let changes = best.pulse.sign_changes(0.05);
        if check == 0 {
            assert!(changes <= 1, "tau {tau}: {changes} sign changes");
        } else {
            assert!(changes >= 2, "tau {tau}: {changes} sign changes");
        }
    }
}

#[test]
fn restarts_agree_on_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = OptimizationConfig { delta: 0.25, tau_c: 20.0, ..Default::default() };
    let starts = standard_starts(&cfg).unwrap();
    let (_, single) = optimize_multistart(&cfg, &starts).unwrap();
    let mut best = f64::MIN;
    for _ in 0..5 {
        let (_, base) = &starts[rng.random_range(0..starts.len())];
        let amps: Vec<f64> =
            base.amplitudes().iter().map(|a| (a + rng.random_range(-0.05..0.05)).clamp(-1.0, 1.0)).collect();
        let res =
            optimize_pulse(&OptimizationConfig { initial: Some(base.with_amplitudes(&amps).unwrap()), ..cfg.clone() })
                .unwrap();
        best = best.max(res.fidelity);
    }
    assert!((best - single.fidelity).abs() < 1e-3, "{best} vs {}", single.fidelity);
}
