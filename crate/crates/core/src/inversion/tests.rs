use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn meta(m: usize) -> Vec<DatumMeta> {
    (0..m)
        .map(|k| DatumMeta {
            well: format!("W{k}"),
            step: 0,
            quantity: Quantity::OilRate,
            cell: None,
        })
        .collect()
}

fn normal_members(j: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    (0..j)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect()
}

#[test]
fn misfit_examples() {
    assert_eq!(data_misfit(&[1.0, 2.0], &[1.0, 1.0], &[1.0, 2.0]), 0.0);
    assert_eq!(data_misfit(&[1.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]), 0.5);
    let mut r = ChaCha20Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..100).map(|_| r.random_range(-5.0..5.0)).collect();
    let g: Vec<f64> = (0..100).map(|_| r.random_range(-5.0..5.0)).collect();
    let gamma: Vec<f64> = (0..100).map(|_| r.random_range(0.1..2.0)).collect();
    let mut resid = Vec::new();
    for k in 0..100 {
        resid.push((y[k] - g[k]) / gamma[k].sqrt());
    }
    let naive = 0.5 * resid.iter().map(|e| e * e).sum::<f64>();
    assert!((data_misfit(&y, &gamma, &g) - naive).abs() <= 1e-12 * naive);
}

#[test]
fn alpha_branches() {
    // Both candidates below the remaining budget: the larger is used.
    match alpha_from_stats(500.0, 1e4, 100, 0.0) {
        AlphaStep::Step { alpha, s_next } => {
            assert!((1.0 / alpha - 0.1).abs() < 1e-15);
            assert!((alpha - 10.0).abs() < 1e-12);
            assert!((s_next - 0.1).abs() < 1e-15);
        }
        other => panic!("{other:?}"),
    }
    // Small misfit spread: sqrt(50) > 1 takes the whole budget at once.
    assert_eq!(
        alpha_from_stats(1e4, 1.0, 100, 0.0),
        AlphaStep::Step { alpha: 1.0, s_next: 1.0 }
    );
    match alpha_from_stats(1e6, 1e12, 100, 0.0) {
        AlphaStep::Step { alpha, .. } => assert!((1.0 / alpha - 5e-5).abs() < 1e-18),
        other => panic!("{other:?}"),
    }
    // Candidates exceed the remaining budget: clamp and finish.
    match alpha_from_stats(1.0, 1.0, 100, 0.7) {
        AlphaStep::Step { alpha, s_next } => {
            assert_eq!(s_next, 1.0);
            assert!((alpha - 1.0 / 0.3).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(adaptive_alpha(&[0.0, 0.0], 4, 0.2).unwrap(), AlphaStep::ExactFit);
    assert!(adaptive_alpha(&[1.0], 4, 1.0).is_err());
}

#[test]
fn adaptive_alpha_uses_sample_variance() {
    let a = 100.0 / 2f64.sqrt();
    let phis = [500.0 - a, 500.0 + a];
    let (mean, var) = misfit_stats(&phis);
    assert!((mean - 500.0).abs() < 1e-12);
    assert!((var - 1e4).abs() < 1e-8);
    match adaptive_alpha(&phis, 100, 0.0).unwrap() {
        AlphaStep::Step { alpha, .. } => assert!((alpha - 10.0).abs() < 1e-10),
        other => panic!("{other:?}"),
    }
}

#[test]
fn covariance_examples() {
    let same = vec![vec![1.0, 2.0]; 4];
    let g = vec![vec![3.0]; 4];
    let (cug, cgg) = cross_covariances(&same, &g).unwrap();
    assert!(cug.iter().all(|&v| v == 0.0) && cgg.iter().all(|&v| v == 0.0));

    // Two members: deviations are ±(u1 − u0)/2, so C = ½ (Δu)(Δg)ᵀ · 2 / 1 / 2.
    let u = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
    let g = vec![vec![1.0], vec![3.0]];
    let (cug, cgg) = cross_covariances(&u, &g).unwrap();
    assert_eq!(cug[(0, 0)], 2.0);
    assert_eq!(cug[(1, 0)], -2.0);
    assert_eq!(cgg[(0, 0)], 2.0);

    let u = normal_members(5, 4, 8);
    let g = normal_members(5, 3, 9);
    let (cug, cgg) = cross_covariances(&u, &g).unwrap();
    let mean = |v: &[Vec<f64>], i: usize| v.iter().map(|r| r[i]).sum::<f64>() / 5.0;
    for a in 0..4 {
        for b in 0..3 {
            let mut acc = 0.0;
            for j in 0..5 {
                acc += (u[j][a] - mean(&u, a)) * (g[j][b] - mean(&g, b));
            }
            assert!((cug[(a, b)] - acc / 4.0).abs() <= 1e-12);
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            let mut acc = 0.0;
            for j in 0..5 {
                acc += (g[j][a] - mean(&g, a)) * (g[j][b] - mean(&g, b));
            }
            assert!((cgg[(a, b)] - acc / 4.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn gaspari_cohn_shape() {
    let c = 3.7;
    assert_eq!(gaspari_cohn(0.0, c), 1.0);
    assert_eq!(gaspari_cohn(2.0 * c, c), 0.0);
    assert_eq!(gaspari_cohn(5.0 * c, c), 0.0);
    assert!((gaspari_cohn(c, c) - 5.0 / 24.0).abs() < 1e-12);
    let below = gaspari_cohn(c * (1.0 - 1e-13), c);
    let above = gaspari_cohn(c * (1.0 + 1e-13), c);
    assert!((below - above).abs() < 1e-12);
    let mut prev = 1.0;
    for i in 0..=10_000 {
        let v = gaspari_cohn(2.0 * c * i as f64 / 10_000.0, c);
        assert!(v <= prev && (0.0..=1.0).contains(&v));
        prev = v;
    }
}

fn linear_obs(a: &DMatrix<f64>, truth: &[f64], gamma: f64) -> Observations {
    let y = a * DVector::from_column_slice(truth);
    let m = y.len();
    Observations::new(y.iter().copied().collect(), vec![gamma; m], meta(m), 1).unwrap()
}

fn linear_forward(a: &DMatrix<f64>) -> impl Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |_, u| Ok((a * DVector::from_column_slice(u)).iter().copied().collect())
}

#[test]
fn zero_cross_covariance_leaves_ensemble() {
    let u = normal_members(6, 3, 1);
    let g = vec![vec![2.0, 1.0]; 6];
    let obs = Observations::new(vec![0.0, 0.0], vec![1.0, 1.0], meta(2), 1).unwrap();
    let next = eki_update(&u, &g, &obs, 1.0, None, 4, 0).unwrap();
    assert_eq!(next, u);
}

#[test]
fn scalar_gain_converges_to_kalman_formula() {
    // G(u) = u, prior N(0, 4), γ = 1: gain 4 / 5.
    let j = 20_000;
    let u: Vec<Vec<f64>> = normal_members(j, 1, 2).into_iter().map(|v| vec![2.0 * v[0]]).collect();
    let obs = Observations::new(vec![3.0], vec![1.0], meta(1), 1).unwrap();
    let next = eki_update(&u, &u, &obs, 1.0, None, 6, 0).unwrap();
    let mean = |v: &[Vec<f64>]| v.iter().map(|r| r[0]).sum::<f64>() / v.len() as f64;
    let gain = (mean(&next) - mean(&u)) / (3.0 - mean(&u));
    assert!((gain - 0.8).abs() < 0.02, "{gain}");
}

#[test]
fn infinite_radius_matches_unlocalized() {
    let grid = GridSpec::new(4, 4, 1, 1.0, 1.0, 1.0).unwrap();
    let u = normal_members(8, 5, 3);
    let a = DMatrix::from_fn(3, 5, |i, k| ((i + 2 * k) % 5) as f64 - 1.5);
    let g: Vec<Vec<f64>> = u.iter().map(|v| linear_forward(&a)(0, v).unwrap()).collect();
    let mut obs = linear_obs(&a, &[0.3, -0.2, 0.1, 0.5, 0.0], 0.1);
    for (k, d) in obs.meta.iter_mut().enumerate() {
        d.cell = Some(5 * k);
    }
    let cells: Vec<Option<usize>> = (0..5).map(|p| Some(3 * p)).collect();
    let rho = localization_matrix(&grid, &cells, &obs.meta, 1e15).unwrap();
    let plain = eki_update(&u, &g, &obs, 2.0, None, 1, 0).unwrap();
    let tapered = eki_update(&u, &g, &obs, 2.0, Some(&rho), 1, 0).unwrap();
    for (p, t) in plain.iter().zip(&tapered) {
        for (x, y) in p.iter().zip(t) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
    // A finite radius changes the update.
    let rho = localization_matrix(&grid, &cells, &obs.meta, 1.0).unwrap();
    let local = eki_update(&u, &g, &obs, 2.0, Some(&rho), 1, 0).unwrap();
    assert_ne!(local, plain);
}

#[test]
fn linear_noise_free_misfit_drops() {
    let a = DMatrix::from_fn(6, 3, |i, k| (1.0 + i as f64) * if k == i % 3 { 1.0 } else { 0.2 });
    let truth = [0.8, -1.1, 0.4];
    let obs = linear_obs(&a, &truth, 1e-3);
    let prior = normal_members(50, 3, 5);
    let out = run_inversion(&prior, &obs, &linear_forward(&a), &InversionConfig::default(), None, 17).unwrap();
    let before = out.prior_misfits.iter().sum::<f64>() / 50.0;
    let after = out.misfits.iter().sum::<f64>() / 50.0;
    assert!(after <= before / 25.0, "{before} -> {after}");
    assert_eq!(out.state.termination, Termination::Budget);
    assert!((out.state.alpha_inverse_sum() - 1.0).abs() <= 1e-12);
}

#[test]
fn zero_iterations_return_prior() {
    let a = DMatrix::identity(2, 2);
    let obs = linear_obs(&a, &[1.0, 1.0], 0.5);
    let prior = normal_members(4, 2, 1);
    let cfg = InversionConfig {
        max_iter: 0,
        ..InversionConfig::default()
    };
    let out = run_inversion(&prior, &obs, &linear_forward(&a), &cfg, None, 0).unwrap();
    assert_eq!(out.posterior, prior);
    assert_eq!(out.state.s, 0.0);
    assert_eq!(out.state.termination, Termination::MaxIterations);
}

#[test]
fn forward_failure_names_member() {
    let obs = Observations::new(vec![1.0], vec![1.0], meta(1), 1).unwrap();
    let prior = normal_members(5, 1, 1);
    let forward = |j: usize, u: &[f64]| {
        if j == 3 {
            Err(Error::InvalidField("boom".into()))
        } else {
            Ok(u.to_vec())
        }
    };
    match run_inversion(&prior, &obs, &forward, &InversionConfig::default(), None, 0) {
        Err(Error::Forward { member, .. }) => assert_eq!(member, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn parallel_and_serial_runs_agree() {
    let a = DMatrix::from_fn(4, 3, |i, k| (i as f64 + 1.0) * 0.5 + k as f64);
    let obs = linear_obs(&a, &[0.5, 0.5, -0.5], 0.01);
    let prior = normal_members(30, 3, 2);
    let run = || run_inversion(&prior, &obs, &linear_forward(&a), &InversionConfig::default(), None, 9).unwrap();
    let par = run();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let ser = pool.install(run);
    assert_eq!(par.posterior, ser.posterior);
    assert_eq!(par.state, ser.state);
}

proptest! {
    #[test]
    fn budget_telescopes(seed in 0u64..200, noise in 1e-3f64..1.0) {
        let a = DMatrix::from_fn(5, 2, |i, k| ((i * 3 + k * 7) % 4) as f64 - 1.0);
        let obs = linear_obs(&a, &[1.0, -2.0], noise);
        let prior = normal_members(12, 2, seed);
        let out = run_inversion(&prior, &obs, &linear_forward(&a), &InversionConfig::default(), None, seed).unwrap();
        let mut prev = 0.0;
        for r in &out.state.history {
            prop_assert!(r.s >= prev && r.s <= 1.0 + 1e-12);
            prop_assert!(r.alpha >= 1.0);
            prev = r.s;
        }
        if out.state.termination == Termination::Budget {
            prop_assert!((out.state.alpha_inverse_sum() - 1.0).abs() <= 1e-12);
        }
    }
}
