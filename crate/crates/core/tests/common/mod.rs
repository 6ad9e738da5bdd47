#![allow(dead_code)]

use jumpfdt::integrals::{eval_j_quadrature, JumpIntegralSpec};
use jumpfdt::model::{
    AffineJumpMap, Density, GaussianBump, GaussianDensity, IntensityShape, JumpLaw,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn m1(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn normal_vector(n: usize, scale: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `A A^T / k * spread + floor * I`.
pub fn random_spd(k: usize, spread: f64, floor: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = normal_matrix(k, k, rng);
    &a * a.transpose() * (spread / k as f64) + DMatrix::identity(k, k) * floor
}

pub fn random_gaussian(k: usize, rng: &mut impl Rng) -> GaussianDensity {
    GaussianDensity::new(normal_vector(k, 0.5, rng), random_spd(k, 0.5, 0.5, rng)).unwrap()
}

pub fn random_map(k: usize, d: usize, rng: &mut impl Rng) -> AffineJumpMap {
    AffineJumpMap::new(
        normal_vector(k, 0.5, rng),
        normal_matrix(k, k, rng) * (0.25 / k as f64),
        normal_matrix(k, d, rng) * 0.6,
    )
    .unwrap()
}

pub fn random_bump(k: usize, rng: &mut impl Rng) -> GaussianBump {
    GaussianBump::new(normal_vector(k, 0.7, rng), random_spd(k, 1.0, 0.7, rng)).unwrap()
}

/// Gaussian `p0`, Gaussian law, optional single bump.
pub fn random_gaussian_spec(
    k: usize,
    d: usize,
    bump: bool,
    rng: &mut impl Rng,
) -> JumpIntegralSpec {
    let p0: Density = random_gaussian(k, rng).into();
    let map = random_map(k, d, rng);
    let law = JumpLaw::Gaussian(random_gaussian(d, rng));
    let shape = bump.then(|| IntensityShape::Bump(random_bump(k, rng)));
    JumpIntegralSpec::new(p0, map, law, shape).unwrap()
}

/// A point typical of the pushed-forward density: `x0 + h(x0, z)`.
pub fn typical_point(spec: &JumpIntegralSpec, rng: &mut impl Rng) -> Vec<f64> {
    let x0 = spec.p0.sample(rng);
    let z = spec.law.sample(rng);
    spec.map
        .apply(x0.as_slice(), z.as_slice())
        .unwrap()
        .as_slice()
        .to_vec()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Sample mean and its naive standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `S + A` with `S` symmetric positive-definite and `A` skew: every
/// eigenvalue has a positive real part.
pub fn random_stable(k: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = normal_matrix(k, k, rng);
    random_spd(k, 1.0, 0.3, rng) + (&a - a.transpose()) * 0.5
}

/// Per-entry mean and standard error of `x x^T` over zero-mean samples,
/// compared with `c`: the largest `|mean - c| / se`.
pub fn max_cov_z(samples: &[DVector<f64>], c: &DMatrix<f64>) -> f64 {
    let k = c.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let prods: Vec<f64> = samples.iter().map(|x| x[i] * x[j]).collect();
            let (m, se) = mean_se(&prods);
            worst = worst.max((m - c[(i, j)]).abs() / se);
        }
    }
    worst
}

/// Quadrature refined by doubling the node count until two successive
/// estimates agree to 1e-10. Forty nodes alone leave percent-level error when
/// `H* nu` is wide compared to `p0`.
pub fn converged_quadrature(spec: &JumpIntegralSpec, x: &[f64]) -> f64 {
    let mut n = 40;
    let mut prev = eval_j_quadrature(spec, x, n).unwrap();
    loop {
        n *= 2;
        let next = eval_j_quadrature(spec, x, n).unwrap();
        if rel_err(next, prev) < 1e-10 || n >= 640 {
            return next;
        }
        prev = next;
    }
}
