//! Exact Ornstein–Uhlenbeck results used as ground truth.
//!
//! For `dx = -L x dt + G dW` the stationary law is `N(0, C)` with
//! `L C + C L^T = G G^T`, and every mean-state response to an affine jump is
//! a matrix exponential applied to a fixed vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::estimators::ResponseCurve;
use crate::model::{AffineJumpMap, GaussianDensity, IntensityShape, JumpLaw};

/// Smallest real part among the eigenvalues of `m`.
pub fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::INFINITY, f64::min)
}

/// `exp(t A)`; Padé scaling and squaring.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    assert!(a.is_square(), "matrix exponential of a non-square matrix");
    if a.nrows() == 0 {
        return a.clone();
    }
    (a * t).exp()
}

/// Solves `L C + C L^T = Q` for positive-stable `L`.
pub fn solve_lyapunov(l: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = l.nrows();
    check_dim("Lyapunov L columns", k, l.ncols())?;
    check_dim("Lyapunov rhs rows", k, q.nrows())?;
    check_dim("Lyapunov rhs columns", k, q.ncols())?;
    let re = min_real_eigenvalue(l);
    if !(re > 0.0) {
        return Err(Error::Unstable(re));
    }
    // vec(L C + C L^T) = (I ⊗ L + L ⊗ I) vec(C), column-major vec
    let n = k * k;
    let mut op = DMatrix::zeros(n, n);
    for j in 0..k {
        for i in 0..k {
            let row = j * k + i;
            for m in 0..k {
                op[(row, j * k + m)] += l[(i, m)];
                op[(row, m * k + i)] += l[(j, m)];
            }
        }
    }
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov operator"))?;
    let c = DMatrix::from_column_slice(k, k, sol.as_slice());
    Ok((&c + c.transpose()) * 0.5)
}

/// Relative residual `|L C + C L^T - Q| / |Q|` in the Frobenius norm.
pub fn lyapunov_residual(l: &DMatrix<f64>, c: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (l * c + c * l.transpose() - q).norm() / q.norm()
}

/// Parameters of the centered OU process `dx = -L x dt + G dW`.
#[derive(Debug, Clone)]
pub struct OuParams {
    l: DMatrix<f64>,
    g: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl OuParams {
    pub fn new(l: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let k = l.nrows();
        check_dim("OU matrix L columns", k, l.ncols())?;
        check_dim("OU matrix G rows", k, g.nrows())?;
        check_dim("OU matrix G columns", k, g.ncols())?;
        let ggt = &g * g.transpose();
        if ggt.clone().cholesky().is_none() {
            return Err(Error::NotSpd("G G^T"));
        }
        let cov = solve_lyapunov(&l, &ggt)?;
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotSpd("OU stationary covariance"));
        }
        Ok(Self { l, g, cov })
    }

    /// Scalar process with drift rate `l` and noise amplitude `g`.
    pub fn scalar(l: f64, g: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, l),
            DMatrix::from_element(1, 1, g),
        )
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Stationary covariance `C`.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn stationary_density(&self) -> Result<GaussianDensity> {
        GaussianDensity::new(DVector::zeros(self.dim()), self.cov.clone())
    }

    /// Curve `exp(-tau L) v` on the grid.
    fn propagate(&self, v: &DVector<f64>, tgrid: &[f64]) -> Result<ResponseCurve> {
        let values = tgrid
            .iter()
            .map(|&t| (matrix_exponential(&self.l, -t) * v).as_slice().to_vec())
            .collect();
        ResponseCurve::exact(tgrid.to_vec(), values)
    }
}

fn jump_mean_offset(
    ou: &OuParams,
    map: &AffineJumpMap,
    zbar: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("jump map", ou.dim(), map.dim())?;
    map.offset(zbar.as_slice())
}

/// Mean-state response to a deterministic jump, `exp(-tau L) h`.
pub fn ou_mean_response_det(
    ou: &OuParams,
    map: &AffineJumpMap,
    tgrid: &[f64],
) -> Result<ResponseCurve> {
    if !map.is_z_free() {
        return Err(Error::Invalid(
            "deterministic response needs a z-free jump map".into(),
        ));
    }
    check_dim("jump map", ou.dim(), map.dim())?;
    ou.propagate(map.h(), tgrid)
}

/// Mean-state response to a random jump, `exp(-tau L)(h + H* z̄)`.
pub fn ou_mean_response_random(
    ou: &OuParams,
    map: &AffineJumpMap,
    law: &JumpLaw,
    tgrid: &[f64],
) -> Result<ResponseCurve> {
    let v = jump_mean_offset(ou, map, &law.mean())?;
    ou.propagate(&v, tgrid)
}

/// `(∫ g p0, ∫ x g p0)` for a Gaussian bump against `N(0, C)`.
pub fn bump_moments(
    cov: &DMatrix<f64>,
    center: &DVector<f64>,
    bump_cov: &DMatrix<f64>,
) -> Result<(f64, DVector<f64>)> {
    let sum = cov + bump_cov;
    let chol = sum.clone().cholesky().ok_or(Error::NotSpd("C + C_g"))?;
    let det_ratio = bump_cov.determinant() / sum.determinant();
    let solved = chol.solve(center);
    let i0 = det_ratio.sqrt() * (-0.5 * center.dot(&solved)).exp();
    let i1 = cov * solved * i0;
    Ok((i0, i1))
}

/// Average response operator of the OU process for `psi(x) = x`.
pub fn ou_response_operator(
    ou: &OuParams,
    map: &AffineJumpMap,
    law: &JumpLaw,
    shape: &IntensityShape,
    tgrid: &[f64],
) -> Result<ResponseCurve> {
    let offset = jump_mean_offset(ou, map, &law.mean())?;
    let amplitude = match shape.bumps() {
        None => offset,
        Some(bumps) => {
            let mut acc = DVector::zeros(ou.dim());
            for (w, b) in bumps {
                check_dim("intensity bump", ou.dim(), b.dim())?;
                let (i0, i1) = bump_moments(ou.cov(), b.center(), b.cov())?;
                acc += (&offset * i0 + map.h_mat() * i1) * w;
            }
            acc
        }
    };
    ou.propagate(&amplitude, tgrid)
}

/// Exact perturbed-minus-unperturbed mean under homogeneous jumps.
#[derive(Debug, Clone)]
pub struct PerturbedMean {
    pub curve: ResponseCurve,
    /// `L - alpha H` has an eigenvalue with nonpositive real part.
    pub unbounded: bool,
}

/// `alpha (L - alpha H)^{-1} (I - exp(-t (L - alpha H))) (h + H* z̄)`, valid
/// for `eta = 1`, `g = 1`.
pub fn ou_exact_perturbed_mean(
    ou: &OuParams,
    map: &AffineJumpMap,
    zbar: &DVector<f64>,
    alpha: f64,
    tgrid: &[f64],
) -> Result<PerturbedMean> {
    let v = jump_mean_offset(ou, map, zbar)?;
    let k = ou.dim();
    let m = ou.l() - map.h_mat() * alpha;
    let lu = m.clone().lu();
    let id = DMatrix::<f64>::identity(k, k);
    let values = tgrid
        .iter()
        .map(|&t| {
            let rhs = (&id - matrix_exponential(&m, -t)) * &v;
            lu.solve(&rhs)
                .map(|x| (x * alpha).as_slice().to_vec())
                .ok_or(Error::Singular("L - alpha H"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbedMean {
        curve: ResponseCurve::exact(tgrid.to_vec(), values)?,
        unbounded: !(min_real_eigenvalue(&m) > 0.0),
    })
}

/// Leading-order prediction `alpha L^{-1} (I - exp(-t L)) (h + H* z̄)`.
pub fn ou_leading_order_mean(
    ou: &OuParams,
    map: &AffineJumpMap,
    zbar: &DVector<f64>,
    alpha: f64,
    tgrid: &[f64],
) -> Result<ResponseCurve> {
    let v = jump_mean_offset(ou, map, zbar)?;
    let k = ou.dim();
    let lu = ou.l().clone().lu();
    let id = DMatrix::<f64>::identity(k, k);
    let values = tgrid
        .iter()
        .map(|&t| {
            let rhs = (&id - matrix_exponential(ou.l(), -t)) * &v;
            lu.solve(&rhs)
                .map(|x| (x * alpha).as_slice().to_vec())
                .ok_or(Error::Singular("L"))
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseCurve::exact(tgrid.to_vec(), values)
}

/// Infinite-time gap `alpha ((L - alpha H)^{-1} - L^{-1}) (h + H* z̄)`.
pub fn leading_order_gap(
    ou: &OuParams,
    map: &AffineJumpMap,
    zbar: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    let v = jump_mean_offset(ou, map, zbar)?;
    let m = ou.l() - map.h_mat() * alpha;
    let exact = m.lu().solve(&v).ok_or(Error::Singular("L - alpha H"))?;
    let lead = ou.l().clone().lu().solve(&v).ok_or(Error::Singular("L"))?;
    Ok((exact - lead) * alpha)
}
