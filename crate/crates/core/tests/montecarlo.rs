use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use telegraph::drive::Drive;
use telegraph::ensemble::{evolve_average, Backend};
use telegraph::fidelity::{not_fidelity, not_target, Solver};
use telegraph::montecarlo::{
    mc_average_evolution, mc_average_sampled, mc_gate_fidelity, mc_process_map, mc_state_and_fidelity, McConfig,
};
use telegraph::noise::{rtn_model, rtn_rates, sample_trajectory_from, MarkovNoiseModel, RtnSpec};
use telegraph::operators::{c, pauli, DensityOperator, Pauli};
use telegraph::pulse::{pi_pulse, short_corpse_not, ControlPulse, Segment};

fn plus_x() -> DensityOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DensityOperator::pure(&[c(s, 0.0), c(s, 0.0)]).unwrap()
}

#[test]
fn dephasing_average_matches_ensemble() {
    let spec = RtnSpec::new(0.3, 2.0).unwrap();
    let idle = ControlPulse::new(vec![Segment { duration: 6.0, amplitude: 0.0 }], 1.0).unwrap();
    let model = rtn_model(&spec, &idle);
    let times = [1.0, 3.0, 6.0];
    let est = mc_average_sampled(&model, &plus_x(), &times, &McConfig::new(100_000, 7)).unwrap();
    for (e, &t) in est.iter().zip(&times) {
        let det = evolve_average(&plus_x(), &model, t, Backend::Exact).unwrap();
        let worst = (e.mean_state.matrix() - det.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst <= 3.0 * e.std_error, "t={t}: {worst:e} vs {:e}", e.std_error);
        assert!((e.mean_state.weight() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn error_shrinks_as_inverse_root_n() {
    let spec = RtnSpec::new(0.25, 3.0).unwrap();
    let pulse = short_corpse_not(1.0).unwrap();
    let model = rtn_model(&spec, &pulse);
    let small = mc_average_evolution(&model, &plus_x(), pulse.duration(), &McConfig::new(1_000, 1)).unwrap();
    let large = mc_average_evolution(&model, &plus_x(), pulse.duration(), &McConfig::new(100_000, 1)).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((7.0..=13.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn noiseless_fidelity_is_exact() {
    let spec = RtnSpec::new(0.0, 1.0).unwrap();
    let pulse = pi_pulse(1.0).unwrap();
    let est =
        mc_gate_fidelity(&rtn_model(&spec, &pulse), pulse.duration(), &not_target(), &McConfig::new(200, 4)).unwrap();
    assert!((est.fidelity - 1.0).abs() < 1e-14);
    // jumps still split the evolution, so only rounding noise remains
    assert!(est.std_error < 1e-14);
}

#[test]
fn deterministic_value_inside_both_intervals() {
    let spec = RtnSpec::new(0.125, 5.0).unwrap();
    let pulse = short_corpse_not(1.0).unwrap();
    let model = rtn_model(&spec, &pulse);
    let det = not_fidelity(&Solver::Ensemble(Backend::Exact), &pulse, &spec).unwrap();
    for n in [100, 100_000] {
        let est = mc_gate_fidelity(&model, pulse.duration(), &not_target(), &McConfig::new(n, 99)).unwrap();
        assert!((est.fidelity - det).abs() <= 3.0 * est.std_error, "n={n}: {} vs {det}", est.fidelity);
    }
}

#[test]
fn process_map_and_combined_run_agree_with_deterministic() {
    let spec = RtnSpec::new(0.25, 1.0).unwrap();
    let pulse = pi_pulse(1.0).unwrap();
    let model = rtn_model(&spec, &pulse);
    let cfg = McConfig::new(20_000, 3);
    let mc = mc_process_map(&model, pulse.duration(), &cfg).unwrap();
    let det = telegraph::fidelity::process_map(&Solver::Ensemble(Backend::Exact), &pulse, &spec).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let diff = (mc.map.matrix()[(i, j)] - det.matrix()[(i, j)]).abs();
            assert!(diff <= 3.0 * mc.std_errors[(i, j)] + 1e-14, "({i},{j})");
        }
    }
    let (state, fid) = mc_state_and_fidelity(&model, &plus_x(), pulse.duration(), &not_target(), &cfg).unwrap();
    let alone = mc_gate_fidelity(&model, pulse.duration(), &not_target(), &cfg).unwrap();
    assert_eq!(fid, alone);
    let st = mc_average_evolution(&model, &plus_x(), pulse.duration(), &cfg).unwrap();
    assert_eq!(state.mean_state, st.mean_state);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = RtnSpec::new(0.2, 0.7).unwrap();
    let pulse = short_corpse_not(1.0).unwrap();
    let model = rtn_model(&spec, &pulse);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            mc_state_and_fidelity(&model, &plus_x(), pulse.duration(), &not_target(), &McConfig::new(5_000, 17))
                .unwrap()
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0.mean_state.matrix().as_slice(), b.0.mean_state.matrix().as_slice());
    assert_eq!(a.1.fidelity.to_bits(), b.1.fidelity.to_bits());
}

#[test]
fn rejects_non_unitary_target() {
    let spec = RtnSpec::new(0.2, 0.7).unwrap();
    let pulse = pi_pulse(1.0).unwrap();
    let r = mc_gate_fidelity(
        &rtn_model(&spec, &pulse),
        pulse.duration(),
        &(not_target() * c(2.0, 0.0)),
        &McConfig::new(10, 1),
    );
    assert!(r.is_err());
}

#[test]
fn three_state_noise_matches_ensemble() {
    // a non-symmetric three-level fluctuator
    let rates = nalgebra::DMatrix::from_row_slice(3, 3, &[-0.9, 0.3, 0.2, 0.5, -0.3, 0.6, 0.4, 0.0, -0.8]);
    let z = pauli(Pauli::Z);
    let offsets = vec![z.scale(0.2), z.scale(-0.1), z.scale(0.05)];
    let drive = Drive::qubit_x(&short_corpse_not(1.0).unwrap());
    let model = MarkovNoiseModel::from_transition_rates(rates, offsets, drive).unwrap();
    let t = 7.0;
    let est = mc_average_evolution(&model, &plus_x(), t, &McConfig::new(50_000, 8)).unwrap();
    let det = evolve_average(&plus_x(), &model, t, Backend::Exact).unwrap();
    let worst = (est.mean_state.matrix() - det.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(worst <= 3.0 * est.std_error);
}

#[test]
fn telegraph_sampler_statistics() {
    let tau = 2.0;
    let horizon = 10.0;
    let rates = rtn_rates(tau);
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = 40_000;
    let lags = [0.5, 1.0, 2.0];
    let mut switches = 0usize;
    let mut corr = [0.0; 3];
    let mut start_counts = [0usize; 2];
    for _ in 0..n {
        let tr = sample_trajectory_from(&rates, &[0.5, 0.5], horizon, &mut rng);
        switches += tr.switch_times.len();
        start_counts[tr.initial_state] += 1;
        let sign = |k: usize| if k == 0 { 1.0 } else { -1.0 };
        for (c, &lag) in corr.iter_mut().zip(&lags) {
            *c += sign(tr.state_at(3.0)) * sign(tr.state_at(3.0 + lag));
        }
    }
    // Poisson switching at rate 1/τ
    let mean = switches as f64 / n as f64;
    let expect = horizon / tau;
    assert!((mean - expect).abs() < 4.0 * (expect / n as f64).sqrt(), "{mean}");
    // ±1 autocorrelation exp(-2 lag / τ)
    for (c, &lag) in corr.iter().zip(&lags) {
        let est = c / n as f64;
        assert!((est - (-2.0 * lag / tau).exp()).abs() < 4.0 / (n as f64).sqrt(), "lag {lag}: {est}");
    }
    // chi-square of the initial-state histogram, 1 dof, 99.9% quantile 10.83
    let e = n as f64 / 2.0;
    let chi2: f64 = start_counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    assert!(chi2 < 10.83, "chi2 {chi2}");
}

#[test]
fn dwell_times_are_exponential() {
    let tau = 1.5;
    let rates = rtn_rates(tau);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut dwell = Vec::new();
    while dwell.len() < 50_000 {
        let tr = sample_trajectory_from(&rates, &[1.0, 0.0], 200.0, &mut rng);
        dwell.extend(tr.switch_times.windows(2).map(|w| w[1] - w[0]));
    }
    // chi-square against Exp(1/τ) with 10 equiprobable bins, 9 dof, 99.9% quantile 27.88
    let bins = 10;
    let mut counts = vec![0usize; bins];
    for &d in &dwell {
        let u = 1.0 - (-d / tau).exp();
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = dwell.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    assert!(chi2 < 27.88, "chi2 {chi2}");
}
