//! Property suites: transform isometry, thresholding laws, estimator
//! consistency and reproducibility.

use invwave_core::estimators::{
    self, threshold_data, threshold_level_dependent, threshold_operator_entries, LinearSpec,
    Nl1Spec, Nl2Spec, ThresholdMode,
};
use invwave_core::operators::{build_diagonal, GalerkinMatrix, KernelKind};
use invwave_core::simulate::{observe, synthesize_signal, SignalSpec};
use invwave_core::wavelet::{dwt, idwt, CoeffVector, MultiIndex, WaveletFilter};
use proptest::prelude::*;

fn coeff_vec(max_level: i32) -> impl Strategy<Value = CoeffVector> {
    let n = 1usize << (max_level + 1);
    proptest::collection::vec(-1.0f64..1.0, n)
        .prop_map(move |v| CoeffVector::from_values(max_level, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dwt_roundtrip_and_parseval(
        order in prop::sample::select(vec![1u32, 2, 4, 8]),
        log_n in 6u32..11,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let n = 1usize << log_n;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let filter = WaveletFilter::daubechies(order).unwrap();
        let c = dwt(&x, &filter).unwrap();
        let l2: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((c.l2_norm() - l2).abs() < 1e-10);
        let back = idwt(&c, &filter);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let again = dwt(&back, &filter).unwrap();
        for (a, b) in again.values().iter().zip(c.values()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_is_linear_idempotent_contraction(c in coeff_vec(6), j in -1i32..=6) {
        let p = c.project_level(j).unwrap();
        prop_assert_eq!(p.project_level(j).unwrap(), p.clone());
        prop_assert!(p.l2_norm() <= c.l2_norm() + 1e-15);
        // linearity: P(2c) = 2 P(c)
        let doubled = CoeffVector::from_values(
            c.max_level(),
            c.values().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let p2 = doubled.project_level(j).unwrap();
        for (a, b) in p2.values().iter().zip(p.values()) {
            prop_assert!((a - 2.0 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn besov_norm_monotone_in_s(c in coeff_vec(5)) {
        let mut prev = c.besov_norm(0.0, 2.0, 1).unwrap();
        for s in [0.5, 1.0, 1.5, 2.0] {
            let cur = c.besov_norm(s, 2.0, 1).unwrap();
            prop_assert!(cur + 1e-12 >= prev, "s={} dropped {} -> {}", s, prev, cur);
            prev = cur;
        }
    }

    #[test]
    fn level_threshold_matches_scalar_loop_and_is_idempotent(
        c in coeff_vec(6),
        kappa in 0.1f64..3.0,
        x in 1e-6f64..1e-1,
        j0 in -1i32..3,
        j1 in 4i32..=6,
    ) {
        let t = 1.0;
        let out = threshold_level_dependent(&c, x, kappa, t, j0, j1);
        // independent scalar-loop oracle
        for i in 0..c.len() {
            let idx = MultiIndex::from_flat(i);
            let level = idx.level();
            let v = c.values()[i];
            let expected = if level > j1 {
                0.0
            } else {
                let excess = ((level - j0).max(0)) as f64;
                let thr = kappa * 2.0f64.powi(level) * x * excess.sqrt();
                if v.abs() >= thr { v } else { 0.0 }
            };
            prop_assert_eq!(out.values()[i], expected, "index {}", i);
        }
        prop_assert_eq!(
            threshold_level_dependent(&out, x, kappa, t, j0, j1),
            out.clone()
        );
    }

    #[test]
    fn data_threshold_scalar_loop_idempotence_and_kappa_monotone(
        c in coeff_vec(6),
        eps in 1e-6f64..0.5,
        kappa1 in 0.1f64..1.5,
        factor in 1.0f64..4.0,
        j in 0i32..=6,
    ) {
        let (out1, kept1) = threshold_data(&c, eps, kappa1, j).unwrap();
        let thr = estimators::threshold_scale(eps, kappa1);
        for i in 0..c.len() {
            let level = MultiIndex::from_flat(i).level();
            let v = c.values()[i];
            let expected = if level > j || v.abs() < thr { 0.0 } else { v };
            prop_assert_eq!(out1.values()[i], expected);
        }
        // idempotence
        let (again, _) = threshold_data(&out1, eps, kappa1, j).unwrap();
        prop_assert_eq!(again, out1.clone());
        // kept set shrinks as kappa grows
        let (out2, kept2) = threshold_data(&c, eps, kappa1 * factor, j).unwrap();
        prop_assert!(kept2 <= kept1);
        for i in 0..c.len() {
            if out2.values()[i] != 0.0 {
                prop_assert_eq!(out2.values()[i], out1.values()[i]);
            }
        }
    }

    #[test]
    fn operator_threshold_scalar_loop_and_monotone(
        seed in any::<u64>(),
        delta in 1e-6f64..0.5,
        kappa in 0.1f64..2.0,
        factor in 1.0f64..4.0,
    ) {
        let base = build_diagonal(1.0, 4).unwrap();
        let noisy = base.add_noise(0.3, seed); // sizable entries everywhere
        let (out, kept) = threshold_operator_entries(&noisy, delta, kappa).unwrap();
        let thr = estimators::threshold_scale(delta, kappa);
        let n = noisy.dim();
        let mut kept_oracle = 0usize;
        for r in 0..n {
            for c in 0..n {
                let v = noisy.entries()[(r, c)];
                let expected = if v.abs() >= thr { v } else { 0.0 };
                prop_assert_eq!(out.entries()[(r, c)], expected);
                if expected != 0.0 { kept_oracle += 1; }
            }
        }
        prop_assert_eq!(kept, kept_oracle);
        // idempotence
        let (again, kept_again) = threshold_operator_entries(&out, delta, kappa).unwrap();
        prop_assert_eq!(again.entries(), out.entries());
        prop_assert_eq!(kept_again, kept);
        // monotone in kappa
        let (_, kept_bigger) = threshold_operator_entries(&noisy, delta, kappa * factor).unwrap();
        prop_assert!(kept_bigger <= kept);
    }
}

#[test]
fn zero_noise_exact_recovery_all_three() {
    let filter = WaveletFilter::daubechies(8).unwrap();
    let j_max = 7;
    let k = build_diagonal(1.0, j_max).unwrap();
    // signal inside V_4
    let f = synthesize_signal(&SignalSpec::Smooth(2), j_max, &filter)
        .unwrap()
        .project_level(4)
        .unwrap();
    let obs = observe(&f, &k, 0.0, 0.0, 31).unwrap();

    let lin = estimators::linear_galerkin(&obs, &LinearSpec { j: 5, t: 1.0, tau: None }).unwrap();
    let nl1 = estimators::nl1_estimate(
        &obs,
        &Nl1Spec {
            j0: 2,
            j1: 5,
            kappa: 0.4,
            t: 1.0,
            tau: None,
            threshold_mode: ThresholdMode::Theoretical,
        },
    )
    .unwrap();
    let nl2 = estimators::nl2_estimate(
        &obs,
        &Nl2Spec { j: 5, kappa_op: 1.5, kappa_data: 1.5, t: 1.0, tau: None },
    )
    .unwrap();
    for est in [&lin, &nl1, &nl2] {
        assert!(!est.cutoff_triggered);
        let err: f64 = est
            .f
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "recovery error {err}");
    }
}

#[test]
fn observation_noise_sources_are_uncorrelated() {
    // sample correlation between a fixed operator-noise entry and a fixed
    // data-noise entry stays within +/- 3/sqrt(n_seeds)
    let filter = WaveletFilter::daubechies(4).unwrap();
    let j_max = 4;
    let k = build_diagonal(1.0, j_max).unwrap();
    let f = synthesize_signal(&SignalSpec::Smooth(1), j_max, &filter).unwrap();
    let kf = k.apply(f.values());
    let (delta, eps) = (1e-2, 1e-2);
    let n_seeds = 10_000u64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for seed in 0..n_seeds {
        let obs = observe(&f, &k, delta, eps, seed).unwrap();
        let x = obs.k_delta.entries()[(2, 3)] - k.entries()[(2, 3)];
        let y = obs.g.values()[5] - kf[5];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let n = n_seeds as f64;
    let cov = sxy / n - (sx / n) * (sy / n);
    let vx = sxx / n - (sx / n) * (sx / n);
    let vy = syy / n - (sy / n) * (sy / n);
    let corr = cov / (vx * vy).sqrt();
    assert!(corr.abs() < 0.03, "correlation {corr}");
}

#[test]
fn observe_is_linear_in_the_signal_for_fixed_seed() {
    let filter = WaveletFilter::daubechies(4).unwrap();
    let j_max = 5;
    let k = build_diagonal(1.0, j_max).unwrap();
    let f1 = synthesize_signal(&SignalSpec::Smooth(1), j_max, &filter).unwrap();
    let f2 = synthesize_signal(&SignalSpec::Smooth(3), j_max, &filter).unwrap();
    let sum = CoeffVector::from_values(
        j_max,
        f1.values().iter().zip(f2.values()).map(|(a, b)| a + b).collect(),
    )
    .unwrap();
    let zero = CoeffVector::zeros(j_max);
    let seed = 97;
    let (d, e) = (1e-3, 1e-4);
    let g12 = observe(&sum, &k, d, e, seed).unwrap().g;
    let g1 = observe(&f1, &k, d, e, seed).unwrap().g;
    let g2 = observe(&f2, &k, d, e, seed).unwrap().g;
    let g0 = observe(&zero, &k, d, e, seed).unwrap().g;
    for i in 0..g12.len() {
        let resid = g12.values()[i] - g1.values()[i] - g2.values()[i] + g0.values()[i];
        assert!(resid.abs() < 1e-12, "index {i}: {resid}");
    }
}

#[test]
fn rerun_determinism_bit_identical() {
    let filter = WaveletFilter::daubechies(8).unwrap();
    let j_max = 6;
    let k = invwave_core::operators::build_log_potential(j_max, &filter).unwrap();
    let f = synthesize_signal(&SignalSpec::Tent, j_max, &filter).unwrap();
    let a = observe(&f, &k, 1e-3, 1e-5, 12345).unwrap();
    let b = observe(&f, &k, 1e-3, 1e-5, 12345).unwrap();
    assert_eq!(a, b);
    let ea = estimators::linear_galerkin(&a, &LinearSpec { j: 4, t: 1.0, tau: None }).unwrap();
    let eb = estimators::linear_galerkin(&b, &LinearSpec { j: 4, t: 1.0, tau: None }).unwrap();
    assert_eq!(ea.f.values(), eb.f.values());
}

#[test]
fn gaussian_spectral_norm_scaling_smoke() {
    // median over 30 seeds of ||Xi|| / sqrt(n) for n = 128 sits near 2
    let n_level = 6; // dim 128
    let zero = GalerkinMatrix::from_entries(
        n_level,
        0.0,
        KernelKind::Custom,
        nalgebra::DMatrix::zeros(1 << (n_level + 1), 1 << (n_level + 1)),
    )
    .unwrap();
    let mut ratios: Vec<f64> = (0..30u64)
        .map(|seed| {
            let noisy = zero.add_noise(1.0, seed);
            let sv = noisy.singular_values();
            sv[0] / ((1usize << (n_level + 1)) as f64).sqrt()
        })
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    assert!((1.7..=2.3).contains(&median), "median {median}");
}
