//! Closed-form embeddings and integrals against Monte-Carlo and independent
//! matrix-algebra oracles.

mod common;

use mmdpoints_core::{Embedding, GaussianMixture, Integrand, Kernel, PointSet, Target};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const MC: usize = 1_000_000;

fn mat(v: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, v)
}

/// Component integral of `grad_1 k(x_j, x)` written as in the appendix, with the
/// scalar `l^-2` read as `l^-2 I` and the exponent completed as `c^T P c / 2`.
fn appendix_gradient_integral(xj: &[f64], mu: &[f64], sigma: &DMatrix<f64>, l: f64) -> DVector<f64> {
    appendix_gradient_integral_with(xj, mu, sigma, l, 1.0)
}

/// `lead` multiplies the `l^-2 x_j` term in the left factor of the exponent;
/// the typeset formula has `lead = 2`.
fn appendix_gradient_integral_with(xj: &[f64], mu: &[f64], sigma: &DMatrix<f64>, l: f64, lead: f64) -> DVector<f64> {
    let d = xj.len();
    let il2 = l.powi(-2);
    let eye = DMatrix::<f64>::identity(d, d);
    let x = DVector::from_column_slice(xj);
    let m = DVector::from_column_slice(mu);
    let sinv = sigma.clone().try_inverse().unwrap();
    let p = (&eye * il2 + &sinv).try_inverse().unwrap();
    let c = &x * il2 + &sinv * &m;
    let left = &x * (lead * il2) + &sinv * &m;
    let scale = (sigma * il2 + &eye).determinant().powf(-0.5)
        * (-0.5 * m.dot(&(&sinv * &m))).exp()
        * (-0.5 * il2 * x.dot(&x) + 0.5 * left.dot(&(&p * &c))).exp();
    (-&x * il2 + (&p * &c) * il2) * scale
}

/// Appendix form of the `f1` component integral.
fn appendix_f1(mu: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let d = mu.len();
    let eye = DMatrix::<f64>::identity(d, d);
    let m = DVector::from_column_slice(mu);
    let sinv = sigma.clone().try_inverse().unwrap();
    let inner = (&sinv + &eye).try_inverse().unwrap();
    let a = &sinv * &m;
    (0.5 * a.dot(&(&inner * &a))).exp() * (-0.5 * m.dot(&a)).exp() * (sigma + &eye).determinant().powf(-0.5)
}

#[test]
fn closed_forms_agree_with_monte_carlo_on_random_mixtures() {
    let mut rng = common::rng(2024);
    for case in 0..20 {
        let d = 1 + case % 3;
        let comps = 1 + (case / 3) % 3;
        let gmm = common::random_mixture(&mut rng, d, comps);
        let target: Target<f64> = gmm.into();
        let l = [0.5, 1.0, 2.0][case % 3];
        let k = Kernel::gaussian(l).unwrap();
        let emb = Embedding::new(k, &target).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let anchor = common::random_points(&mut rng, 3, d, 1.5);
        let gradspan = Integrand::grad_span(anchor, k);

        let ys = target.sample(MC, &mut rng).unwrap();
        let ys2 = target.sample(MC, &mut rng).unwrap();
        let tag = |what: &str| format!("case {case} (d={d}, m={comps}, l={l}) {what}");

        let kv: Vec<f64> = ys.rows().map(|y| k.eval(&x, y).unwrap()).collect();
        common::assert_within_se(&tag("mean embedding"), emb.mean_embedding(&x).unwrap(), &kv, 4.0);

        let grad = emb.grad_mean_embedding(&x).unwrap();
        for (c, g) in grad.iter().enumerate() {
            let gv: Vec<f64> = ys.rows().map(|y| k.grad1(&x, y).unwrap()[c]).collect();
            common::assert_within_se(&tag("grad mean embedding"), *g, &gv, 4.0);
        }

        let pairs: Vec<f64> = ys.rows().zip(ys2.rows()).map(|(a, b)| k.eval(a, b).unwrap()).collect();
        common::assert_within_se(&tag("double integral"), emb.double_integral(), &pairs, 4.0);

        for f in [Integrand::F1, Integrand::F2, gradspan] {
            let vals: Vec<f64> = ys.rows().map(|y| f.eval(y).unwrap()).collect();
            common::assert_within_se(&tag(f.name()), f.true_integral(&target).unwrap(), &vals, 4.0);
        }
    }
}

#[test]
fn gradient_embedding_matches_appendix_matrix_form() {
    let mut rng = common::rng(7);
    for case in 0..30 {
        let d = 1 + case % 3;
        let gmm = common::random_mixture(&mut rng, d, 1 + case % 2);
        let l = [0.5, 1.0, 2.0][case % 3];
        let target: Target<f64> = gmm.clone().into();
        let emb = Embedding::new(Kernel::gaussian(l).unwrap(), &target).unwrap();
        let xj: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut want = DVector::<f64>::zeros(d);
        for c in gmm.components() {
            want += appendix_gradient_integral(&xj, &c.mean, &mat(&c.cov, d), l) * c.weight;
        }
        let got = emb.grad_mean_embedding(&xj).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!(
                (g - w).abs() <= 1e-12 * (1.0 + w.abs()),
                "case {case}: {got:?} vs {want}"
            );
        }
    }
}

#[test]
fn typeset_exponent_factor_would_be_wrong() {
    let sigma = mat(&[0.5, 0.1, 0.1, 0.3], 2);
    let (xj, mu) = ([0.7, -0.4], [0.2, 0.5]);
    let target: Target<f64> = GaussianMixture::gaussian(mu.to_vec(), vec![0.5, 0.1, 0.1, 0.3])
        .unwrap()
        .into();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    let got = emb.grad_mean_embedding(&xj).unwrap();
    let fixed = appendix_gradient_integral_with(&xj, &mu, &sigma, 1.0, 1.0);
    let typeset = appendix_gradient_integral_with(&xj, &mu, &sigma, 1.0, 2.0);
    assert!((got[0] - fixed[0]).abs() < 1e-14);
    assert!((got[0] - typeset[0]).abs() > 1e-3);
}

#[test]
fn f1_matches_appendix_form() {
    let mut rng = common::rng(8);
    for case in 0..30 {
        let d = 1 + case % 3;
        let gmm = common::random_mixture(&mut rng, d, 1 + case % 3);
        let want: f64 = gmm
            .components()
            .iter()
            .map(|c| c.weight * appendix_f1(&c.mean, &mat(&c.cov, d)))
            .sum();
        let got = Integrand::F1.true_integral(&gmm.into()).unwrap();
        assert!((got - want).abs() < 1e-13, "case {case}: {got} vs {want}");
    }
}

#[test]
fn standard_normal_reference_values() {
    let target: Target<f64> = GaussianMixture::isotropic(2, 1.0).unwrap().into();
    let emb = Embedding::new(Kernel::gaussian(1.0).unwrap(), &target).unwrap();
    assert!((emb.mean_embedding(&[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
    assert!((emb.double_integral() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(emb.grad_mean_embedding(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert!((Integrand::F1.true_integral(&target).unwrap() - 0.5).abs() < 1e-15);
    assert!((Integrand::F2.true_integral(&target).unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(Integrand::F1.eval(&[0.0, 0.0]).unwrap(), 1.0);
    assert_eq!(Integrand::F2.eval(&[3.0, 4.0]).unwrap(), 25.0);
}

#[test]
fn gradient_embedding_matches_finite_difference_of_embedding() {
    let shifted: Target<f64> = GaussianMixture::gaussian(vec![1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0])
        .unwrap()
        .into();
    let mut rng = common::rng(3);
    let mut cases: Vec<(Target<f64>, Vec<f64>)> = vec![(shifted, vec![0.0, 0.0])];
    for _ in 0..20 {
        let d = rng.random_range(1..=3);
        let t: Target<f64> = common::random_mixture(&mut rng, d, 3).into();
        let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        cases.push((t, x));
    }
    let h = 1e-5;
    for (t, x) in &cases {
        let emb = Embedding::new(Kernel::gaussian(0.8).unwrap(), t).unwrap();
        let g = emb.grad_mean_embedding(x).unwrap();
        for l in 0..x.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p[l] += h;
            m[l] -= h;
            let fd = (emb.mean_embedding(&p).unwrap() - emb.mean_embedding(&m).unwrap()) / (2.0 * h);
            assert!((g[l] - fd).abs() <= 1e-6 * (1e-3 + g[l].abs()), "{g:?} vs fd {fd}");
        }
    }
}

#[test]
fn gradspan_symmetric_anchors_integrate_to_zero() {
    let target: Target<f64> = GaussianMixture::isotropic(2, 0.8).unwrap().into();
    let anchor = PointSet::from_rows(&[[0.5, -1.0], [-0.5, 1.0]]).unwrap();
    let f = Integrand::grad_span(anchor, Kernel::gaussian(1.0).unwrap());
    assert!(f.true_integral(&target).unwrap().abs() < 1e-16);
    let single = Integrand::grad_span(
        PointSet::from_rows(&[[0.3, 0.1]]).unwrap(),
        Kernel::gaussian(1.0).unwrap(),
    );
    assert_eq!(single.eval(&[0.3, 0.1]).unwrap(), 0.0);
}

#[test]
fn embeddings_of_shuffled_dataset_agree() {
    let mut rng = common::rng(4);
    let data = common::random_points(&mut rng, 200, 2, 2.0);
    let mut perm: Vec<usize> = (0..200).collect();
    perm.reverse();
    perm.swap(3, 150);
    let a: Target<f64> = mmdpoints_core::EmpiricalTarget::new(data.clone()).into();
    let b: Target<f64> = mmdpoints_core::EmpiricalTarget::new(data.permuted(&perm)).into();
    for k in [Kernel::gaussian(1.0).unwrap(), Kernel::matern32(0.7).unwrap()] {
        let ea = Embedding::new(k, &a).unwrap();
        let eb = Embedding::new(k, &b).unwrap();
        let x = [0.1, 0.4];
        assert!((ea.mean_embedding(&x).unwrap() - eb.mean_embedding(&x).unwrap()).abs() <= 1e-12);
        assert!((ea.double_integral() - eb.double_integral()).abs() <= 1e-12);
    }
}
