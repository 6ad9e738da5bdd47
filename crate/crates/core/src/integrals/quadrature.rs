//! Tensor-product Gauss–Hermite quadrature over the jump parameter, used as an
//! independent check of the closed forms.

use nalgebra::DMatrix;

use super::JumpIntegralSpec;
use crate::error::{check_dim, Error, Result};
use crate::model::{GaussianDensity, JumpLaw};

/// Nodes and weights for `∫ f(x) exp(-x^2) dx` with `n` points.
///
/// Golub–Welsch eigenvalues, polished by Newton steps on the orthonormal
/// Hermite recursion; weights from `1 / Σ p_k(x)^2`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "at least one node");
    if n == 1 {
        return (vec![0.0], vec![std::f64::consts::PI.sqrt()]);
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = hermite_orthonormal(n, *x);
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
        let (_, _, sumsq) = hermite_orthonormal(n, *x);
        weights.push(1.0 / sumsq);
    }
    // enforce the exact symmetry of the rule
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(p_n(x), p_n'(x), Σ_{k<n} p_k(x)^2)` for the orthonormal Hermite family.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next =
            (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    // p_n' = sqrt(2n) p_{n-1}
    (cur, (2.0 * n as f64).sqrt() * prev, sumsq)
}

/// Quadrature nodes and probability weights for a Gaussian law.
fn gaussian_rule(nu: &GaussianDensity, n: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let d = nu.dim();
    if d > 3 {
        return Err(Error::Invalid(format!(
            "quadrature supports jump parameters of dimension <= 3, got {d}"
        )));
    }
    let (x, w) = gauss_hermite(n);
    let scale = std::f64::consts::PI.powf(-0.5 * d as f64);
    let l = nu.cholesky_factor() * std::f64::consts::SQRT_2;
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    let mut xi = DMatrix::zeros(d, 1);
    for _ in 0..total {
        let mut weight = scale;
        for (a, &i) in idx.iter().enumerate() {
            xi[(a, 0)] = x[i];
            weight *= w[i];
        }
        let z = nu.mean() + (&l * &xi).column(0);
        out.push((weight, z.as_slice().to_vec()));
        for a in idx.iter_mut() {
            *a += 1;
            if *a < n {
                break;
            }
            *a = 0;
        }
    }
    Ok(out)
}

/// `J(x)` (or `J_g(x)`) by direct summation over the jump parameter: exact for
/// discrete laws, `n_nodes`-point Gauss–Hermite per axis for Gaussian ones.
pub fn eval_j_quadrature(spec: &JumpIntegralSpec, x: &[f64], n_nodes: usize) -> Result<f64> {
    check_dim("jump-integral argument", spec.p0.dim(), x.len())?;
    if n_nodes == 0 {
        return Err(Error::Invalid("quadrature needs at least one node".into()));
    }
    let points: Vec<(f64, Vec<f64>)> = match &spec.law {
        JumpLaw::Discrete { atoms, probs } => probs
            .iter()
            .zip(atoms)
            .map(|(p, a)| (*p, a.as_slice().to_vec()))
            .collect(),
        JumpLaw::Gaussian(g) => gaussian_rule(g, n_nodes)?,
        JumpLaw::Mixture(m) => {
            let mut all = Vec::new();
            for (gamma, c) in m.iter() {
                all.extend(
                    gaussian_rule(c, n_nodes)?
                        .into_iter()
                        .map(|(w, z)| (gamma * w, z)),
                );
            }
            all
        }
    };
    let jac = spec.map.jacobian();
    let mut sum = 0.0;
    for (w, z) in &points {
        let (xhat, _) = spec.map.invert(x, z)?;
        let xs = xhat.as_slice();
        sum += w * (spec.p0.ln_pdf(xs) + spec.ln_shape(xs)).exp();
    }
    Ok(sum * jac)
}
