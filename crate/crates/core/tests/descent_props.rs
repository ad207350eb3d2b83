mod common;

use mmdpoints_core::descent::DEFAULT_CHECK_EVERY;
use mmdpoints_core::{
    check_assumption5, check_step_size, descent_step, initial_points, mmd_squared, phi, run_descent,
    stationarity_residual, DescentConfig, Embedding, EmpiricalTarget, Error, Kernel, NoiseSchedule, PointSet, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Plain descent written directly from the kernel and embedding primitives.
fn plain_step(emb: &Embedding<'_, f64>, x: &PointSet<f64>, gamma: f64) -> PointSet<f64> {
    let k = emb.kernel();
    let n = x.len() as f64;
    let mut out = Vec::new();
    for xi in x.rows() {
        let mut g = vec![0.0; xi.len()];
        for xj in x.rows() {
            for (a, b) in g.iter_mut().zip(k.grad1(xi, xj).unwrap()) {
                *a += b / n;
            }
        }
        let gm = emb.grad_mean_embedding(xi).unwrap();
        for l in 0..xi.len() {
            out.push(xi[l] - gamma * (g[l] - gm[l]));
        }
    }
    PointSet::new(out, x.dim()).unwrap()
}

fn max_diff(a: &PointSet<f64>, b: &PointSet<f64>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_noise_reduces_to_plain_descent() {
    let mut rng = common::rng(1);
    for case in 0..20 {
        let d = 1 + case % 3;
        let target: Target<f64> = common::random_mixture(&mut rng, d, 2).into();
        let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
        let mut x = common::random_points(&mut rng, 1 + case % 7, d, 2.0);
        let mut y = x.clone();
        let mut unused = common::rng(0);
        for _ in 0..25 {
            x = descent_step(&emb, &x, 0.5, 0.0, &mut unused).unwrap();
            y = plain_step(&emb, &y, 0.5);
        }
        assert!(max_diff(&x, &y) <= 1e-13, "case {case}: {}", max_diff(&x, &y));
    }
    // No noise means no draws.
    let mut a = common::rng(5);
    let b = a.clone();
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    descent_step(&emb, &PointSet::zeros(3, 2).unwrap(), 1.0, 0.0, &mut a).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_enters_only_the_gradient_arguments() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let x = common::random_points(&mut common::rng(2), 5, 2, 2.0);
    let (gamma, beta) = (0.3, 0.2);
    let got = descent_step(&emb, &x, gamma, beta, &mut common::rng(9)).unwrap();

    let mut rng = common::rng(9);
    let u: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut right = Vec::new();
    let mut naive = Vec::new();
    for i in 0..5 {
        let z: Vec<f64> = (0..2).map(|l| x.point(i)[l] + beta * u[2 * i + l]).collect();
        // bracket(z) = -(1/n) sum_j phi(z, x_j)
        let mut b = [0.0; 2];
        for xj in x.rows() {
            let p = phi(&emb, &z, xj).unwrap();
            b[0] -= p[0] / 5.0;
            b[1] -= p[1] / 5.0;
        }
        for l in 0..2 {
            right.push(x.point(i)[l] - gamma * b[l]);
            naive.push(z[l] - gamma * b[l]);
        }
    }
    let right = PointSet::new(right, 2).unwrap();
    let naive = PointSet::new(naive, 2).unwrap();
    assert!(max_diff(&got, &right) < 1e-14);
    assert!(max_diff(&got, &naive) > 1e-2);
}

#[test]
fn steps_are_deterministic_and_order_independent() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let x = common::random_points(&mut common::rng(3), 8, 2, 2.0);
    let a = descent_step(&emb, &x, 1.0, 0.1, &mut common::rng(4)).unwrap();
    let b = descent_step(&emb, &x, 1.0, 0.1, &mut common::rng(4)).unwrap();
    assert_eq!(a, b);

    // Without noise, permuting the input permutes the output bitwise.
    let perm = [7, 2, 5, 0, 1, 6, 3, 4];
    let p = descent_step(&emb, &x.permuted(&perm), 1.0, 0.0, &mut common::rng(0)).unwrap();
    let q = descent_step(&emb, &x, 1.0, 0.0, &mut common::rng(0)).unwrap();
    assert_eq!(p, q.permuted(&perm));
}

#[test]
fn displacement_bounded_by_gamma_times_residual() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let mut x = common::random_points(&mut common::rng(12), 6, 2, 2.0);
    let gamma = 0.7;
    for _ in 0..50 {
        let r = stationarity_residual(&emb, &x).unwrap();
        let next = descent_step(&emb, &x, gamma, 0.0, &mut common::rng(0)).unwrap();
        for (a, b) in x.rows().zip(next.rows()) {
            let mv = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!(mv <= gamma * r * (1.0 + 1e-12));
        }
        x = next;
    }
}

#[test]
fn stationary_set_stays_put() {
    let target: Target<f64> = mmdpoints_core::GaussianMixture::isotropic(2, 1.0).unwrap().into();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let x = PointSet::zeros(1, 2).unwrap();
    let y = descent_step(&emb, &x, 1.0, 0.0, &mut common::rng(0)).unwrap();
    assert!(max_diff(&x, &y) <= 1e-14);
}

#[test]
fn one_iteration_run_equals_one_step_and_runs_replay() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let x0 = PointSet::zeros(6, 2).unwrap();
    let cfg = DescentConfig::new(1.0, 1, NoiseSchedule::power_law(1.0, 0.5), 42);
    let out = run_descent(&emb, &x0, &cfg).unwrap();
    let step = descent_step(&emb, &x0, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert_eq!(out.final_points, step);
    assert_eq!(out.steps, 1);

    // A longer noisy run is a replay of descent_step with the run seed.
    let mut cfg = DescentConfig::new(1.0, 40, NoiseSchedule::power_law(1.0, 0.5), 7);
    cfg.log_every = 1;
    cfg.assumption_check_every = Some(10);
    let out = run_descent(&emb, &x0, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = x0.clone();
    for (t, entry) in (1..=40).zip(&out.trajectory) {
        assert_eq!(entry.t, t);
        let fresh = mmd_squared(&emb, &x).unwrap().mmd;
        assert!((entry.mmd - fresh).abs() <= 1e-12);
        assert_eq!(entry.beta, (t as f64).powf(-0.5));
        assert_eq!(entry.a5_lhs.is_some(), t % 10 == 0);
        x = descent_step(&emb, &x, 1.0, entry.beta, &mut rng).unwrap();
    }
    assert_eq!(out.final_points, x);
    let last = out.trajectory.last().unwrap();
    assert_eq!(last.t, 41);
    assert!(out.trajectory.windows(2).all(|w| w[0].t < w[1].t && w[0].mmd >= 0.0));

    let again = run_descent(&emb, &x0, &cfg).unwrap();
    assert_eq!(again.final_points, out.final_points);
    assert_eq!(again.trajectory, out.trajectory);
}

#[test]
fn small_steps_never_increase_mmd() {
    let mut rng = common::rng(21);
    for _ in 0..3 {
        let d = rng.random_range(1..=3);
        let target: Target<f64> = common::random_mixture(&mut rng, d, 2).into();
        let k = Kernel::gaussian(1.0).unwrap();
        let emb = Embedding::new(k, &target).unwrap();
        let gamma = check_step_size(1.0, d, k.kappa_bound()).bound;
        let mut x = common::random_points(&mut rng, 10, d, 2.0);
        let mut prev = mmd_squared(&emb, &x).unwrap().mmd_squared;
        for _ in 0..200 {
            x = descent_step(&emb, &x, gamma, 0.0, &mut common::rng(0)).unwrap();
            let m = mmd_squared(&emb, &x).unwrap().mmd_squared;
            assert!(m <= prev + 1e-12);
            prev = m;
        }
    }
}

#[test]
fn stop_residual_ends_the_run() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let mut cfg = DescentConfig::new(1.0, 100_000, NoiseSchedule::None, 0);
    cfg.stop_residual = Some(1e-6);
    let out = run_descent(&emb, &PointSet::zeros(5, 2).unwrap(), &cfg).unwrap();
    assert!(out.stopped_on_residual);
    assert!(out.steps < 100_000);
    assert!(stationarity_residual(&emb, &out.final_points).unwrap() <= 1e-6);
    assert!(out.trajectory.last().unwrap().residual <= 1e-6);
}

#[test]
fn divergence_and_overflow_are_reported() {
    let data = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
    let target: Target<f64> = EmpiricalTarget::new(data).into();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let x0 = PointSet::from_rows(&[[1e-6, 0.0], [1.0, 0.0]]).unwrap();
    let mut cfg = DescentConfig::new(1e8, 10, NoiseSchedule::None, 0);
    cfg.log_every = 1;
    match run_descent(&emb, &x0, &cfg) {
        Err(Error::Diverged {
            trajectory,
            mmd,
            initial,
            ..
        }) => {
            assert!(mmd > 1e3 * initial);
            assert!(!trajectory.is_empty());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
    // A short lengthscale makes the bracket exceed one, so f64::MAX overflows.
    let sharp = Embedding::new(Kernel::gaussian(0.1).unwrap(), &target).unwrap();
    let x = PointSet::from_rows(&[[0.1, 0.0], [5.0, 5.0]]).unwrap();
    match descent_step(&sharp, &x, f64::MAX, 0.0, &mut common::rng(0)) {
        Err(Error::NonFiniteUpdate { particle }) => assert_eq!(particle, 0),
        other => panic!("expected overflow, got {other:?}"),
    }
}

#[test]
fn noise_check_lhs_obeys_reproducing_property_bound() {
    // d/dz_l of the witness is <f, d/dz_l k(z, .)>, so each bracket component
    // is at most MMD / l for a Gaussian kernel and lhs <= d MMD^2 / l^2.
    let mut rng = common::rng(17);
    for _ in 0..30 {
        let d = rng.random_range(1..=3);
        let target: Target<f64> = common::random_mixture(&mut rng, d, 2).into();
        let l = rng.random_range(0.5..2.0);
        let emb = Embedding::new(Kernel::gaussian(l).unwrap(), &target).unwrap();
        let n = rng.random_range(1..10);
        let x = common::random_points(&mut rng, n, d, 2.0);
        let beta = rng.random_range(0.01..1.0);
        let c = check_assumption5(&emb, &x, beta, 20, &mut rng).unwrap();
        let mmd2 = mmd_squared(&emb, &x).unwrap().mmd_squared;
        assert!(c.lhs <= d as f64 * mmd2 / (l * l) * (1.0 + 1e-9) + 1e-15);
        assert!(c.rhs_first_order <= c.rhs);
        assert_eq!(c.satisfied, c.lhs >= c.rhs);
    }
}

#[test]
fn noise_check_is_degenerate_at_stationary_points() {
    let target: Target<f64> = mmdpoints_core::GaussianMixture::isotropic(2, 1.0).unwrap().into();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let c = check_assumption5(&emb, &PointSet::zeros(1, 2).unwrap(), 1e-9, 10, &mut common::rng(0)).unwrap();
    assert!(c.lhs < 1e-15 && c.rhs < 1e-15);
}

#[test]
fn adaptive_schedule_picks_from_candidates() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let schedule = NoiseSchedule::adaptive_default();
    let mut cfg = DescentConfig::new(1.0, 250, schedule.clone(), 3);
    cfg.log_every = 1;
    let out = run_descent(&emb, &PointSet::zeros(4, 2).unwrap(), &cfg).unwrap();
    let resolved = |t: usize| {
        if t == 1 {
            1
        } else {
            1 + (t - 1) / DEFAULT_CHECK_EVERY * DEFAULT_CHECK_EVERY
        }
    };
    for e in out.trajectory.iter().filter(|e| e.t <= 250) {
        let cands = schedule.candidates_at(resolved(e.t));
        assert!(cands.contains(&e.beta), "t={} beta={} not in {cands:?}", e.t, e.beta);
    }
}

#[test]
fn noise_switches_off_after_cutoff() {
    let target = common::benchmark();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let mut cfg = DescentConfig::new(1.0, 30, NoiseSchedule::power_law(1.0, 0.5), 0);
    cfg.noise_until = Some(10);
    cfg.log_every = 1;
    let out = run_descent(&emb, &PointSet::zeros(3, 2).unwrap(), &cfg).unwrap();
    for e in &out.trajectory {
        assert_eq!(e.beta == 0.0, e.t > 10);
    }
}

#[test]
fn initial_points_default_to_the_origin() {
    let x = initial_points::<f64>(4, 3, None, 9).unwrap();
    assert_eq!(x, PointSet::zeros(4, 3).unwrap());
    let a = initial_points::<f64>(50, 2, Some(1e-6), 9).unwrap();
    assert_eq!(a, initial_points(50, 2, Some(1e-6), 9).unwrap());
    assert_ne!(a, initial_points(50, 2, Some(1e-6), 10).unwrap());
    let max = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max > 0.0 && max < 1e-5, "{max}");
    // Jitter draws do not consume the step-noise stream.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let first: f64 = StandardNormal.sample(&mut rng);
    assert_ne!(a.as_slice()[0], 1e-6 * first);
    assert!(initial_points::<f64>(2, 2, Some(-1.0), 0).is_err());
}
