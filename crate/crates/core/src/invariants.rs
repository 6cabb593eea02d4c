//! Property suites and Monte-Carlo statistics checked against the
//! density-matrix oracle.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::campaign::{format_config, parse_config_str, preset_config};
use crate::inference::parity::{estimate_parity, parity_from_counts};
use crate::inference::witness::{mle_correct, swap_witness};
use crate::instrument::{outcome_distribution, ConfusionMatrix, InstrumentModel};
use crate::noise::{NoiseConfig, NoiseRealization};
use crate::oracle;
use crate::physics::{
    build_hamiltonian, coupling_strength, dfs_effective_hamiltonian, gradient_detuning, ideal_parity, ion_separation,
    larmor_splitting, CODATA,
};
use crate::sim::engine::{run_experiment, ShotConfig};
use crate::sim::propagate::{apply_collective_pulse, evolve_segment, Drive};
use crate::sim::sequence::{PrepTarget, PulseAxis, SequenceBuilder, Sign};
use crate::state::{DensityMatrix, ProductState, TwoSpinState};

fn quiet_config(xi: f64, d: f64, grad: f64, model: InstrumentModel) -> ShotConfig {
    ShotConfig {
        xi,
        separation: d,
        noise: NoiseConfig { grad_static: grad, ..NoiseConfig::quiet() },
        instrument: model,
        detection_coordinate: 0.0,
        dt: 1e-2,
    }
}

fn state_strategy() -> impl Strategy<Value = TwoSpinState> {
    prop::array::uniform8(-1.0f64..1.0).prop_filter_map("non-zero", |v| {
        let mut s = TwoSpinState([0, 1, 2, 3].map(|i| Complex64::new(v[2 * i], v[2 * i + 1])));
        let n = s.norm_sqr().sqrt();
        (n > 1e-3).then(|| {
            s.0.iter_mut().for_each(|a| *a /= n);
            s
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hamiltonian_is_hermitian_and_block_diagonal(w1 in -1e4f64..1e4, w2 in -1e4f64..1e4, xi in -1.0f64..1.0) {
        let m = build_hamiltonian(w1, w2, xi).unwrap().matrix();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((m[i][j] - m[j][i].conj()).norm() <= 1e-12 * (1.0 + m[i][j].norm()));
            }
        }
        let rot = dfs_effective_hamiltonian(&m).unwrap();
        prop_assert!((rot.delta - (w1 - w2)).abs() <= 1e-9 * (1.0 + w1.abs() + w2.abs()));
        prop_assert!((rot.coupling - 4.0 * xi).abs() <= 1e-12);
        let reference = oracle::hamiltonian(w1, w2, xi);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((m[i][j] - reference[(i, j)]).norm() <= 1e-9 * (1.0 + w1.abs() + w2.abs()));
            }
        }
    }

    #[test]
    fn degenerate_dfs_split_is_four_xi(w in -1e3f64..1e3, xi in 1e-4f64..1.0) {
        let m = build_hamiltonian(w, w, xi).unwrap().matrix();
        let (a, b, c) = (m[1][1].re, m[2][2].re, m[1][2].re);
        let half = (0.25 * (a - b).powi(2) + c * c).sqrt();
        prop_assert!((2.0 * half - 4.0 * xi).abs() <= 1e-12 * (1.0 + w.abs()));
    }

    #[test]
    fn coupling_times_cube_is_constant(d in 0.5e-6f64..50e-6) {
        let k = coupling_strength(d).unwrap() * d.powi(3);
        let k0 = coupling_strength(2.4e-6).unwrap() * 2.4e-6f64.powi(3);
        prop_assert!((k / k0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trap_frequency_round_trip(f in 1e5f64..1e8) {
        let d = ion_separation(f).unwrap();
        let g = crate::physics::Geometry::from_separation(d).unwrap();
        prop_assert!((g.trap_frequency() / f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ideal_parity_is_odd(t in 0.0f64..100.0, xi in 0.0f64..0.1, phi in -PI..PI) {
        let p = ideal_parity(t, xi, phi, 1.0);
        prop_assert!((ideal_parity(t, xi, -phi, 1.0) + p).abs() < 1e-12);
        prop_assert!((ideal_parity(t, xi, phi, -1.0) + p).abs() < 1e-12);
        prop_assert!(p.abs() <= 1.0);
    }

    #[test]
    fn gradient_detuning_is_larmor_difference(grad in 0.0f64..1e-3, d in 1e-6f64..1e-5, b in 0.0f64..1e-2) {
        let b2 = b + grad * d;
        let diff = 2.0 * PI * (larmor_splitting(b2).unwrap() - larmor_splitting(b).unwrap());
        let dw = gradient_detuning(grad, d).unwrap();
        prop_assert!((diff - dw).abs() <= 1e-6 * (1.0 + dw.abs()) + 1e-9 * 2.0 * PI * larmor_splitting(b2).unwrap());
    }

    #[test]
    fn detection_distribution_sums_to_one(
        p in prop::array::uniform4(0.0f64..1.0),
        u in 0.5f64..1.0,
        d in 0.5f64..1.0,
    ) {
        let total: f64 = p.iter().sum();
        prop_assume!(total > 1e-6);
        let p = p.map(|v| v / total);
        let q = outcome_distribution(&p, u, d);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(q.iter().all(|&v| v >= 0.0));
        let r = oracle::readout(p, u, d);
        for k in 0..3 {
            prop_assert!((q[k] - r[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_sign_identity(p in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (s, _) = swap_witness(p, 0.01, v, 0.01).unwrap();
        prop_assert_eq!(s < 0.0, p < v);
    }

    #[test]
    fn separable_states_never_violate(
        weights in prop::collection::vec(0.01f64..1.0, 1..4),
        angles in prop::collection::vec(prop::array::uniform4(0.0f64..PI), 4),
    ) {
        let total: f64 = weights.iter().sum();
        let mut rho = DensityMatrix::zero();
        for (w, a) in weights.iter().zip(&angles) {
            let spin = |theta: f64, phase: f64| [Complex64::new((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), 2.0 * phase)];
            let (x, y) = (spin(a[0], a[1]), spin(a[2], a[3]));
            let psi = TwoSpinState([x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1]]);
            rho.add_scaled(&psi.density(), w / total);
        }
        prop_assert!(rho.swap_expectation() >= -1e-12);
        let populations = rho.populations();
        let p = populations[0] + populations[3];
        let v = rho.parity().abs().min(1.0);
        let (s, _) = swap_witness(p.clamp(0.0, 1.0), 0.0, v, 0.0).unwrap();
        prop_assert!(s >= -1e-12);
    }

    #[test]
    fn config_round_trip(seed in 0..=i64::MAX as u64, shots in 1u64..100_000, d in 1.0f64..5.0, t in 0.5f64..30.0) {
        let mut cfg = preset_config("fig3b", &[]).unwrap();
        cfg.seed = seed;
        cfg.shots = shots;
        cfg.geometry = crate::campaign::config::GeometrySpec::Separation(d * 1e-6);
        cfg.sequence.t = t;
        let back = parse_config_str(&format_config(&cfg), None).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn paired_pi_pulses_commute_with_coupling(psi in state_strategy(), xi in 0.001f64..0.1, h in 0.0f64..50.0) {
        let noise = NoiseRealization::constant(h.max(1e-3), 100.0, 0.0);
        let drive = Drive { xi, separation: 2.4e-6, gyromagnetic: CODATA.gyromagnetic(), noise: &noise };
        let mut a = psi;
        evolve_segment(&mut a, &drive, 0.0, h).unwrap();
        apply_collective_pulse(&mut a, PulseAxis::X, PI);
        apply_collective_pulse(&mut a, PulseAxis::X, PI);
        let mut b = psi;
        apply_collective_pulse(&mut b, PulseAxis::X, PI);
        evolve_segment(&mut b, &drive, 0.0, h).unwrap();
        apply_collective_pulse(&mut b, PulseAxis::X, PI);
        prop_assert!(a.fidelity(&b) > 1.0 - 1e-10);
    }

    #[test]
    fn evolution_preserves_norm(psi in state_strategy(), xi in 0.0f64..0.1, grad in -1e-5f64..1e-5, h in 0.0f64..20.0) {
        let noise = NoiseRealization::constant(h.max(1e-3), 1e-2, grad);
        let drive = Drive { xi, separation: 2.4e-6, gyromagnetic: CODATA.gyromagnetic(), noise: &noise };
        let mut a = psi;
        evolve_segment(&mut a, &drive, 0.0, h).unwrap();
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn engine_matches_oracle(
        seed in any::<u64>(),
        t in prop::sample::select(vec![1.0, 2.0, 5.0]),
        phi in -PI..PI,
        grad in 0.0f64..1e-6,
        du in 0.8f64..1.0,
        dd in 0.8f64..1.0,
        prep in 0.9f64..1.0,
        echo in any::<bool>(),
        entangled in any::<bool>(),
    ) {
        let d = 2.4e-6;
        let model = InstrumentModel {
            prep_fidelity: prep,
            d_up: crate::instrument::DetectionCurve::constant(du),
            d_down: crate::instrument::DetectionCurve::constant(dd),
            ..InstrumentModel::ideal()
        };
        let mut cfg = quiet_config(coupling_strength(d).unwrap(), d, grad, model);
        cfg.noise.grad_rms = 5e-7;
        cfg.noise.collective_rms = 1e-8;
        cfg.dt = 2e-3;
        let init = if entangled { PrepTarget::Entangled { fidelity: 0.95 } } else { PrepTarget::Product(ProductState::UpDown) };
        let seq = SequenceBuilder { init, echo, ..SequenceBuilder::new(t, 2.0, phi) }.build().unwrap();
        let interleave = !entangled;
        let (records, _) = run_experiment(&cfg, &seq, 200, interleave, seed, 3).unwrap();
        let expected = oracle::expected_counts(&cfg, &seq, 200, interleave, seed, 3);
        // 16 cases × 6 classes
        prop_assert!(oracle::max_z(&records, &expected) < 4.5);
    }
}

/// Quiet-field, short-T cell with a definite parity and asymmetric readout.
fn biased_cell() -> (ShotConfig, crate::sim::sequence::PulseSequence) {
    let d = 2.4e-6;
    let model = InstrumentModel {
        prep_fidelity: 0.99,
        d_up: crate::instrument::DetectionCurve::constant(0.98),
        d_down: crate::instrument::DetectionCurve::constant(0.80),
        ..InstrumentModel::ideal()
    };
    let cfg = quiet_config(0.2, d, 0.0, model);
    let seq = SequenceBuilder::new(1.0, 2.0, FRAC_PI_2).build().unwrap();
    (cfg, seq)
}

fn oracle_parity(cfg: &ShotConfig, seq: &crate::sim::sequence::PulseSequence, sign: Sign) -> f64 {
    let seq = seq.with_init_sign(sign);
    let noise = NoiseRealization::constant(seq.duration(), cfg.dt, 0.0);
    let rho = oracle::final_rho(cfg, &seq, &noise);
    let (u, d) = cfg.instrument.fidelities(0.0);
    let q = oracle::readout(oracle::populations(&rho), u, d);
    q[0] + q[1] - q[2]
}

#[test]
fn interleaving_cancels_readout_bias() {
    let (cfg, seq) = biased_cell();
    let plus = oracle_parity(&cfg, &seq, Sign::Plus);
    let minus = oracle_parity(&cfg, &seq, Sign::Minus);
    let truth = 0.5 * (plus - minus);
    let bias = 0.5 * (plus + minus);
    // (D_up − D_down)² offset survives in each sign alone
    assert!((bias - (0.98f64 - 0.80).powi(2)).abs() < 1e-9, "bias {bias}");
    let contrast = (2.0 * 0.99 - 1.0) * (0.98f64 + 0.80 - 1.0).powi(2);
    let ideal = ideal_parity(1.0, 0.2, FRAC_PI_2, 1.0);
    assert!((truth - contrast * ideal).abs() < 1e-9, "truth {truth} vs {}", contrast * ideal);

    let n = 100_000;
    let (records, _) = run_experiment(&cfg, &seq, n, true, 7, 0).unwrap();
    let est = estimate_parity(&records).unwrap();
    assert!((est.value - truth).abs() < 3.0 * est.sigma, "{} ± {} vs {truth}", est.value, est.sigma);
    let (plain, _) = run_experiment(&cfg, &seq, n, false, 7, 0).unwrap();
    let p = parity_from_counts(plain[0].counts()).unwrap();
    assert!((p.value - plus).abs() < 3.0 * p.sigma);
    assert!((p.value - truth).abs() > 10.0 * p.sigma, "single-sign estimate should carry the bias");
}

#[test]
fn parity_error_bars_are_calibrated_and_unbiased() {
    let (cfg, seq) = biased_cell();
    let truth = 0.5 * (oracle_parity(&cfg, &seq, Sign::Plus) - oracle_parity(&cfg, &seq, Sign::Minus));
    let runs = 200;
    let (mut z2, mut mean) = (0.0, 0.0);
    for k in 0..runs {
        let (records, _) = run_experiment(&cfg, &seq, 500, true, 1000 + k, 0).unwrap();
        let e = estimate_parity(&records).unwrap();
        z2 += ((e.value - truth) / e.sigma).powi(2);
        mean += e.value;
    }
    let z2 = z2 / runs as f64;
    let mean = mean / runs as f64;
    // mean of χ²₁ over 200 draws: 1 ± 0.1
    assert!((z2 - 1.0).abs() < 0.3, "reduced chi2 {z2}");
    let se = (1.0 - truth * truth).sqrt() / (500.0 * runs as f64).sqrt();
    assert!((mean - truth).abs() < 3.0 * se, "mean {mean} vs {truth}");
}

#[test]
fn mle_is_consistent_at_large_n() {
    let confusion = ConfusionMatrix::from_fidelities(0.95, 0.91);
    let truth = [0.12, 0.08, 0.80];
    let q = confusion.apply(&truth);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000u64;
    let uu = Binomial::new(n, q[0]).unwrap().sample(&mut rng);
    let dd = Binomial::new(n - uu, q[1] / (1.0 - q[0])).unwrap().sample(&mut rng);
    let counts = [uu, dd, n - uu - dd];
    let r = mle_correct(counts, &confusion).unwrap();
    for k in 0..3 {
        let sigma = r.covariance[k][k].sqrt();
        assert!((r.probabilities[k] - truth[k]).abs() < 3.0 * sigma, "class {k}: {} ± {sigma}", r.probabilities[k]);
        assert!(sigma < 2e-3);
    }
}

#[test]
fn alpha_law_with_symmetric_readout() {
    for &d in &[0.99, 0.95, 0.912, 0.8] {
        let model = InstrumentModel::with_symmetric_detection(d);
        let cfg = quiet_config(0.2, 2.4e-6, 0.0, model);
        // pure ±1 parity before readout: χ₊ analyzed at φ = π/2 after a quarter turn
        let t = PI / (8.0 * 0.2);
        let seq = SequenceBuilder { echo: false, ..SequenceBuilder::new(t, 2.0, FRAC_PI_2) }.build().unwrap();
        let (records, _) = run_experiment(&cfg, &seq, 10_000, false, 5, 0).unwrap();
        let e = parity_from_counts(records[0].counts()).unwrap();
        let alpha = 1.0 - 4.0 * d * (1.0 - d);
        assert!((e.value - alpha).abs() < 3.0 * e.sigma.max(1e-3), "D = {d}: {} vs {alpha}", e.value);
    }
}
