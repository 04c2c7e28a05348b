use revolve_core::limits::{discrete_limit_coefficients, gaussian_law_at, limit_coefficients, DiffusionLimit};
use revolve_core::profiles::{builtin_profile, BuiltinProfile};
use revolve_core::simulator::{simulate_ensemble, DiscreteDirection, EvolutionConfig, Switching};
use revolve_core::sphere::{build_grid, AngleVector};
use revolve_core::stats::{convergence_sweep, ks_marginals, poisson_chi_squared, summarize, MomentSummary};
use std::f64::consts::PI;

fn msre(n: usize, eps: f64, paths: usize, seed: u64) -> EvolutionConfig {
    EvolutionConfig::new(builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, n).unwrap(), eps, 1.0, paths, seed)
}

fn msre_limit(n: usize) -> DiffusionLimit {
    let grid = build_grid(n, 20).unwrap();
    limit_coefficients(&builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, n).unwrap(), &grid).unwrap()
}

fn assert_isotropic(summary: &MomentSummary, variance: f64, rel: f64) {
    let n = summary.mean.len();
    for i in 0..n {
        let v = summary.covariance[i][i];
        assert!((v / variance - 1.0).abs() <= rel, "var[{i}] = {v}, expected {variance}");
        assert!(summary.mean[i].abs() <= 4.0 * summary.mean_se[i], "mean[{i}] = {}", summary.mean[i]);
        for j in 0..i {
            let c = summary.covariance[i][j];
            assert!(c.abs() <= 4.0 * summary.covariance_se[i][j], "cov[{i}][{j}] = {c}");
        }
    }
}

#[test]
fn planar_msre_has_unit_covariance() {
    let summary = summarize(&simulate_ensemble(&msre(2, 0.05, 100_000, 101)).unwrap()).unwrap();
    assert_isotropic(&summary, 1.0, 0.03);
}

#[test]
fn spatial_msre_has_two_thirds_covariance() {
    let summary = summarize(&simulate_ensemble(&msre(3, 0.05, 100_000, 102)).unwrap()).unwrap();
    assert_isotropic(&summary, 2.0 / 3.0, 0.03);
}

#[test]
fn four_direction_chain_matches_the_discrete_limit() {
    let profile = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 2).unwrap();
    let law: Vec<DiscreteDirection> = (0..4)
        .map(|k| DiscreteDirection {
            angles: AngleVector::new(vec![k as f64 * PI / 2.0]).unwrap(),
            probability: 0.25,
        })
        .collect();
    let limit = discrete_limit_coefficients(&profile, &law).unwrap();
    let target = gaussian_law_at(&limit, 1.0, &[0.0, 0.0]).unwrap();
    let mut config = EvolutionConfig::new(profile, 0.05, 1.0, 40_000, 103);
    config.switching = Switching::Discrete(law);
    let summary = summarize(&simulate_ensemble(&config).unwrap()).unwrap();
    for i in 0..2 {
        assert!((summary.covariance[i][i] / target.covariance[i][i] - 1.0).abs() <= 0.03);
    }
    assert!(summary.covariance[0][1].abs() <= 4.0 * summary.covariance_se[0][1]);
}

#[test]
fn switch_counts_are_poisson() {
    let ensemble = simulate_ensemble(&msre(2, 0.1, 10_000, 104)).unwrap();
    let test = poisson_chi_squared(&ensemble.switch_counts, 100.0).unwrap();
    assert!(test.p_value > 0.01, "{test:?}");
}

#[test]
fn endpoint_norms_are_rotation_invariant() {
    // the same MSRE started from x0 and from R x0 with R a rotation by 2π/3
    let r = |x: [f64; 2]| {
        let (s, c) = (2.0 * PI / 3.0).sin_cos();
        [c * x[0] - s * x[1], s * x[0] + c * x[1]]
    };
    let x0 = [1.0, 0.5];
    let mut a = msre(2, 0.1, 40_000, 105);
    a.x0 = x0.to_vec();
    let mut b = msre(2, 0.1, 40_000, 106);
    b.x0 = r(x0).to_vec();
    let norms = |config: &EvolutionConfig| -> (f64, f64) {
        let e = simulate_ensemble(config).unwrap();
        let v: Vec<f64> = e.rows().map(|p| p[0].hypot(p[1])).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let (ma, va) = norms(&a);
    let (mb, vb) = norms(&b);
    assert!((ma - mb).abs() <= 4.0 * (va + vb).sqrt(), "{ma} vs {mb}");
}

#[test]
fn ks_accepts_the_limit_at_small_epsilon() {
    let target = gaussian_law_at(&msre_limit(2), 1.0, &[0.0, 0.0]).unwrap();
    let ensemble = simulate_ensemble(&msre(2, 0.02, 50_000, 107)).unwrap();
    for fit in ks_marginals(&ensemble, &target).unwrap() {
        assert!(fit.passes(0.01), "{fit:?}");
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    0.5 * (v[v.len() / 2] + v[(v.len() - 1) / 2])
}

#[test]
fn ks_detects_the_pre_asymptotic_regime() {
    let target = gaussian_law_at(&msre_limit(2), 1.0, &[0.0, 0.0]).unwrap();
    let statistic = |eps: f64| {
        median(
            (0..20)
                .map(|r| {
                    let e = simulate_ensemble(&msre(2, eps, 2_000, 1000 + r)).unwrap();
                    ks_marginals(&e, &target).unwrap()[0].statistic
                })
                .collect(),
        )
    };
    let far = statistic(0.5);
    let near = statistic(0.02);
    assert!(far > near, "{far} vs {near}");
}

#[test]
fn sweep_metric_falls_until_the_noise_floor() {
    let sweep = convergence_sweep(&msre(2, 0.5, 20_000, 108), &[0.8, 0.4, 0.2, 0.1, 0.05], &msre_limit(2), None).unwrap();
    let resolved: Vec<_> = sweep.points.iter().take_while(|p| p.metric > 3.0 * p.noise).collect();
    assert!(resolved.len() >= 2, "{:?}", sweep.points);
    for pair in resolved.windows(2) {
        assert!(pair[1].metric < pair[0].metric);
    }
    assert!(sweep.fit.slope.unwrap() > 0.0);
}

#[test]
#[ignore = "needs 10^6 paths at ε = 0.02; run with --ignored"]
fn step_profile_mean_hits_the_drift() {
    let profile = builtin_profile(BuiltinProfile::StepHalfSphere { c: 1.0, c1: 1.0 }, 3).unwrap();
    let limit = limit_coefficients(&profile, &build_grid(3, 20).unwrap()).unwrap();
    let config = EvolutionConfig::new(profile, 0.02, 1.0, 1_000_000, 109);
    let summary = summarize(&simulate_ensemble(&config).unwrap()).unwrap();
    let d = limit.drift[2];
    assert!((d + 0.25).abs() < 1e-10);
    assert!((summary.mean[2] - d).abs() < 0.01 * d.abs(), "{} vs {d}", summary.mean[2]);
}
