//! Python bindings: models, trajectories, densities, jump maps, the response
//! estimators, the OU oracle and ensemble Monte Carlo.
//!
//! Vectors and matrices cross the boundary as nested lists of floats; heavy
//! calls release the interpreter lock.

use std::path::PathBuf;

use ::jumpfdt as core;
use core::ensemble::EnsembleConfig;
use core::estimators::{ResponseCurve, TestFunction};
use core::integrals::{JumpIntegral, JumpIntegralSpec};
use core::model::{
    fit_gaussian_mixture, fit_quasi_gaussian, AffineJumpMap, GaussianDensity, GaussianMixture,
    JumpLaw,
};
use core::oracle::OuParams;
use core::sde::{ModelSpec, Scheme};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(
            "matrix rows must all have the same length",
        ));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "euler" => Ok(Scheme::EulerMaruyama),
        "exact" => Ok(Scheme::ExactOu),
        other => Err(PyValueError::new_err(format!(
            "unknown scheme {other:?} (expected \"euler\" or \"exact\")"
        ))),
    }
}

fn test_function(name: &str) -> PyResult<TestFunction> {
    match name {
        "identity" => Ok(TestFunction::Identity),
        "energy" => Ok(TestFunction::Energy),
        other => Err(PyValueError::new_err(format!(
            "unknown test function {other:?} (expected \"identity\" or \"energy\")"
        ))),
    }
}

/// Response curve: `lags`, and per-lag `values` and `stderr` lists.
#[pyclass(name = "ResponseCurve", frozen)]
struct PyCurve {
    #[pyo3(get)]
    lags: Vec<f64>,
    #[pyo3(get)]
    values: Vec<Vec<f64>>,
    #[pyo3(get)]
    stderr: Vec<Vec<f64>>,
}

impl From<ResponseCurve> for PyCurve {
    fn from(c: ResponseCurve) -> Self {
        PyCurve {
            lags: c.lags,
            values: c.values,
            stderr: c.stderr,
        }
    }
}

#[pymethods]
impl PyCurve {
    fn __len__(&self) -> usize {
        self.lags.len()
    }

    fn __repr__(&self) -> String {
        format!("ResponseCurve({} lags)", self.lags.len())
    }
}

/// Ornstein–Uhlenbeck parameters `dx = -L x dt + G dW`.
#[pyclass(name = "OuParams", frozen)]
struct PyOu(OuParams);

#[pymethods]
impl PyOu {
    #[new]
    fn new(l: Vec<Vec<f64>>, g: Vec<Vec<f64>>) -> PyResult<Self> {
        OuParams::new(matrix(l)?, matrix(g)?).map(PyOu).map_err(err)
    }

    #[staticmethod]
    fn scalar(l: f64, g: f64) -> PyResult<Self> {
        OuParams::scalar(l, g).map(PyOu).map_err(err)
    }

    /// Stationary covariance `C` solving `L C + C L^T = G G^T`.
    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        rows(self.0.cov())
    }

    /// Exact mean response to the deterministic jump `jump` on `tgrid`.
    fn mean_response_det(&self, jump: &PyJumpMap, tgrid: Vec<f64>) -> PyResult<PyCurve> {
        core::oracle::ou_mean_response_det(&self.0, &jump.0, &tgrid)
            .map(Into::into)
            .map_err(err)
    }

    /// Exact mean response to the random jump `jump` with Gaussian law `z ~ N(mean, cov)`.
    fn mean_response_random(
        &self,
        jump: &PyJumpMap,
        law_mean: Vec<f64>,
        law_cov: Vec<Vec<f64>>,
        tgrid: Vec<f64>,
    ) -> PyResult<PyCurve> {
        let law = gaussian_law(law_mean, law_cov)?;
        core::oracle::ou_mean_response_random(&self.0, &jump.0, &law, &tgrid)
            .map(Into::into)
            .map_err(err)
    }
}

/// SDE model: OU, double well or stochastic Lorenz-96.
#[pyclass(name = "Model", frozen)]
struct PyModel(ModelSpec);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn ou(ou: &PyOu) -> Self {
        PyModel(ModelSpec::Ou(ou.0.clone()))
    }

    #[staticmethod]
    fn double_well(sigma: f64) -> PyResult<Self> {
        ModelSpec::double_well(sigma).map(PyModel).map_err(err)
    }

    #[staticmethod]
    fn lorenz96(k: usize, forcing: f64, sigma: f64) -> PyResult<Self> {
        ModelSpec::lorenz96(k, forcing, sigma)
            .map(PyModel)
            .map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }
}

/// Sampled trajectory on a uniform time grid.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(core::model::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[new]
    fn new(dt: f64, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(PyValueError::new_err(
                "trajectory rows must all have the same length",
            ));
        }
        core::model::Trajectory::new(dt, k, rows.concat())
            .map(PyTrajectory)
            .map_err(err)
    }

    /// Reads a CSV or binary trajectory file.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        core::io::read_trajectory(&path)
            .map(PyTrajectory)
            .map_err(err)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_trajectory(&path, &self.0).map_err(err)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Gaussian or Gaussian-mixture density used as `p0`.
#[pyclass(name = "Density", frozen)]
struct PyDensity(core::model::Density);

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        GaussianDensity::new(DVector::from_vec(mean), matrix(cov)?)
            .map(|g| PyDensity(g.into()))
            .map_err(err)
    }

    #[staticmethod]
    fn mixture(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covs: Vec<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let comps = means
            .into_iter()
            .zip(covs)
            .map(|(m, c)| GaussianDensity::new(DVector::from_vec(m), matrix(c)?).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        GaussianMixture::new(weights, comps)
            .map(|m| PyDensity(m.into()))
            .map_err(err)
    }

    /// Gaussian with the trajectory's sample mean and covariance.
    #[staticmethod]
    fn fit_gaussian(traj: &PyTrajectory) -> PyResult<Self> {
        fit_quasi_gaussian(&traj.0)
            .map(|g| PyDensity(g.into()))
            .map_err(err)
    }

    /// EM fit of an `n`-component mixture on every `stride`-th sample.
    #[staticmethod]
    #[pyo3(signature = (traj, n, stride = 10, max_iter = 200))]
    fn fit_mixture(
        py: Python<'_>,
        traj: &PyTrajectory,
        n: usize,
        stride: usize,
        max_iter: usize,
    ) -> PyResult<Self> {
        py.detach(|| fit_gaussian_mixture(&traj.0, n, stride, max_iter))
            .map(PyDensity)
            .map_err(err)
    }

    fn ln_pdf(&self, x: Vec<f64>) -> f64 {
        self.0.ln_pdf(&x)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Affine jump `x -> x + h + H x + H_star z`.
#[pyclass(name = "JumpMap", frozen)]
struct PyJumpMap(AffineJumpMap);

#[pymethods]
impl PyJumpMap {
    #[new]
    #[pyo3(signature = (h, h_mat = None, h_star = None))]
    fn new(
        h: Vec<f64>,
        h_mat: Option<Vec<Vec<f64>>>,
        h_star: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let k = h.len();
        let h_mat = h_mat
            .map(matrix)
            .transpose()?
            .unwrap_or_else(|| DMatrix::zeros(k, k));
        let h_star = h_star
            .map(matrix)
            .transpose()?
            .unwrap_or_else(|| DMatrix::zeros(k, 0));
        AffineJumpMap::new(DVector::from_vec(h), h_mat, h_star)
            .map(PyJumpMap)
            .map_err(err)
    }

    fn apply(&self, x: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .apply(&x, &z)
            .map(|y| y.as_slice().to_vec())
            .map_err(err)
    }

    /// Pre-image of `x` under the jump with noise `z`.
    fn invert(&self, x: Vec<f64>, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .invert(&x, &z)
            .map(|(y, _)| y.as_slice().to_vec())
            .map_err(err)
    }
}

fn gaussian_law(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<JumpLaw> {
    GaussianDensity::new(DVector::from_vec(mean), matrix(cov)?)
        .map(JumpLaw::Gaussian)
        .map_err(err)
}

/// Simulates the unperturbed model for `steps` steps from `x0`.
#[pyfunction]
#[pyo3(signature = (model, x0, dt, steps, seed, scheme = "euler"))]
fn simulate(
    py: Python<'_>,
    model: &PyModel,
    x0: Vec<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<PyTrajectory> {
    let scheme = self::scheme(scheme)?;
    py.detach(|| core::sde::simulate_with_scheme(&model.0, scheme, &x0, dt, steps, seed))
        .map(PyTrajectory)
        .map_err(err)
}

/// Response to a deterministic jump, estimated from one trajectory.
#[pyfunction]
#[pyo3(signature = (traj, p0, jump, lags, psi = "identity"))]
fn det_jump_response(
    py: Python<'_>,
    traj: &PyTrajectory,
    p0: &PyDensity,
    jump: &PyJumpMap,
    lags: Vec<f64>,
    psi: &str,
) -> PyResult<PyCurve> {
    let psi = test_function(psi)?;
    py.detach(|| core::estimators::det_jump_response(&traj.0, &p0.0, &jump.0, psi, &lags))
        .map(Into::into)
        .map_err(err)
}

/// Response to a random jump with Gaussian law `z ~ N(law_mean, law_cov)`.
#[pyfunction]
#[pyo3(signature = (traj, p0, jump, law_mean, law_cov, lags, psi = "identity"))]
#[allow(clippy::too_many_arguments)]
fn random_jump_response(
    py: Python<'_>,
    traj: &PyTrajectory,
    p0: &PyDensity,
    jump: &PyJumpMap,
    law_mean: Vec<f64>,
    law_cov: Vec<Vec<f64>>,
    lags: Vec<f64>,
    psi: &str,
) -> PyResult<PyCurve> {
    let psi = test_function(psi)?;
    let law = gaussian_law(law_mean, law_cov)?;
    py.detach(|| {
        let spec = JumpIntegralSpec::new(p0.0.clone(), jump.0.clone(), law, None)?;
        core::estimators::random_jump_response(
            &traj.0,
            &p0.0,
            &JumpIntegral::new(spec)?,
            psi,
            &lags,
        )
    })
    .map(Into::into)
    .map_err(err)
}

/// Perturbed-minus-unperturbed ensemble response to a deterministic jump at `t = 0`.
#[pyfunction]
#[pyo3(signature = (model, jump, members, dt, horizon, seed, record_every = 1, common_noise = true, scheme = "euler", psi = "identity"))]
#[allow(clippy::too_many_arguments)]
fn mc_det_jump_response(
    py: Python<'_>,
    model: &PyModel,
    jump: &PyJumpMap,
    members: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    record_every: usize,
    common_noise: bool,
    scheme: &str,
    psi: &str,
) -> PyResult<PyCurve> {
    let mut cfg = EnsembleConfig::new(members, dt, horizon, seed).map_err(err)?;
    cfg.record_every = record_every;
    cfg.common_noise = common_noise;
    cfg.scheme = self::scheme(scheme)?;
    let psi = test_function(psi)?;
    py.detach(|| core::ensemble::mc_det_jump_response(&model.0, &jump.0, psi, &cfg))
        .map(Into::into)
        .map_err(err)
}

/// Integrated autocorrelation time `T_corr` of the trajectory.
#[pyfunction]
fn estimate_tcorr(py: Python<'_>, traj: &PyTrajectory) -> PyResult<f64> {
    py.detach(|| core::estimators::estimate_tcorr(&traj.0))
        .map(|t| t.tcorr)
        .map_err(err)
}

/// Sample autocorrelation matrices `C(lag)` as nested lists.
#[pyfunction]
fn autocorrelation(
    py: Python<'_>,
    traj: &PyTrajectory,
    lags: Vec<f64>,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    py.detach(|| core::estimators::autocorrelation(&traj.0, &lags))
        .map(|a| a.values.iter().map(rows).collect())
        .map_err(err)
}

#[pymodule]
#[pyo3(name = "jumpfdt")]
fn jumpfdt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurve>()?;
    m.add_class::<PyOu>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyJumpMap>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(det_jump_response, m)?)?;
    m.add_function(wrap_pyfunction!(random_jump_response, m)?)?;
    m.add_function(wrap_pyfunction!(mc_det_jump_response, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_tcorr, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    Ok(())
}
