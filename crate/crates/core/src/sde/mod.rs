//! Simulation of the unperturbed SDE `dx = f(x) dt + G(x) dW` and of its
//! jump-perturbed counterpart.
//!
//! Jumps happen at the points of a conditional-intensity process
//! `alpha * eta(t) * g(x(t-))`, simulated by thinning a homogeneous Poisson
//! stream of rate `alpha * sup eta * sup g`. An accepted jump time in
//! `(t_k, t_{k+1}]` is applied to the state at `t_{k+1}` after the diffusion
//! step.

mod rng;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

pub use rng::{member_seed, stream_rng};
pub(crate) use rng::{JUMP_STREAM, NOISE_STREAM, SAMPLING_STREAM};

use crate::error::{check_dim, Error, Result};
use crate::model::{AffineJumpMap, IntensityModel, JumpLaw, Origin, StateVector, Trajectory};
use crate::oracle::{matrix_exponential, OuParams};

/// Unperturbed dynamics.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// `dx = -L x dt + G dW`.
    Ou(OuParams),
    /// `dx = (x - x^3) dt + sigma dW`, scalar.
    DoubleWell { sigma: f64 },
    /// `dx_i = ((x_{i+1} - x_{i-2}) x_{i-1} - x_i + F) dt + sigma dW_i`.
    Lorenz96 { k: usize, forcing: f64, sigma: f64 },
}

impl ModelSpec {
    pub fn double_well(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Invalid(format!(
                "double-well sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(ModelSpec::DoubleWell { sigma })
    }

    pub fn lorenz96(k: usize, forcing: f64, sigma: f64) -> Result<Self> {
        if k < 4 {
            return Err(Error::Invalid(format!("Lorenz-96 needs K >= 4, got {k}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0 && forcing.is_finite()) {
            return Err(Error::Invalid(
                "Lorenz-96 parameters must be finite, sigma >= 0".into(),
            ));
        }
        Ok(ModelSpec::Lorenz96 { k, forcing, sigma })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Ou(ou) => ou.dim(),
            ModelSpec::DoubleWell { .. } => 1,
            ModelSpec::Lorenz96 { k, .. } => *k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ou(_) => "ou",
            ModelSpec::DoubleWell { .. } => "double_well",
            ModelSpec::Lorenz96 { .. } => "lorenz96",
        }
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ModelSpec::Ou(ou) => {
                let l = ou.l();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = -(0..x.len()).map(|j| l[(i, j)] * x[j]).sum::<f64>();
                }
            }
            ModelSpec::DoubleWell { .. } => out[0] = x[0] - x[0] * x[0] * x[0],
            ModelSpec::Lorenz96 { k, forcing, .. } => {
                let k = *k;
                for i in 0..k {
                    let xp1 = x[(i + 1) % k];
                    let xm1 = x[(i + k - 1) % k];
                    let xm2 = x[(i + k - 2) % k];
                    out[i] = (xp1 - xm2) * xm1 - x[i] + forcing;
                }
            }
        }
    }

    /// Writes `G(x) xi`.
    pub fn diffuse(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        match self {
            ModelSpec::Ou(ou) => {
                let g = ou.g();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..xi.len()).map(|j| g[(i, j)] * xi[j]).sum();
                }
            }
            ModelSpec::DoubleWell { sigma } | ModelSpec::Lorenz96 { sigma, .. } => {
                for (o, v) in out.iter_mut().zip(xi) {
                    *o = sigma * v;
                }
            }
        }
    }

    /// Diffusion matrix `G(x)`.
    pub fn diffusion_matrix(&self, _x: &[f64]) -> DMatrix<f64> {
        match self {
            ModelSpec::Ou(ou) => ou.g().clone(),
            ModelSpec::DoubleWell { sigma } | ModelSpec::Lorenz96 { sigma, .. } => {
                DMatrix::identity(self.dim(), self.dim()) * *sigma
            }
        }
    }

    /// Deterministic starting point for burn-in.
    fn burn_in_start(&self) -> Vec<f64> {
        match self {
            ModelSpec::Lorenz96 { k, forcing, .. } => {
                let mut x = vec![*forcing; *k];
                x[0] += 0.01;
                x
            }
            _ => vec![0.0; self.dim()],
        }
    }
}

/// Time-stepping scheme between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    EulerMaruyama,
    /// Exact Gaussian transition; OU models only.
    ExactOu,
}

/// Exact one-step transition of an OU process:
/// `x' = exp(-L dt) x + w`, `w ~ N(0, C - exp(-L dt) C exp(-L^T dt))`.
#[derive(Debug, Clone)]
pub struct OuTransition {
    pub propagator: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

impl OuTransition {
    pub fn new(ou: &OuParams, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::Invalid(format!(
                "transition step must be >= 0, got {dt}"
            )));
        }
        let propagator = matrix_exponential(ou.l(), -dt);
        let c = ou.cov();
        let q = c - &propagator * c * propagator.transpose();
        let noise_cov = (&q + q.transpose()) * 0.5;
        // eigen square root tolerates the rank-deficient dt -> 0 limit
        let eig = noise_cov.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let noise_factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        Ok(Self {
            propagator,
            noise_cov,
            noise_factor,
        })
    }
}

enum Stepper<'a> {
    Euler {
        model: &'a ModelSpec,
        dt: f64,
        sqrt_dt: f64,
    },
    Exact(OuTransition),
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ModelSpec, scheme: Scheme, dt: f64) -> Result<Self> {
        match scheme {
            Scheme::EulerMaruyama => Ok(Stepper::Euler {
                model,
                dt,
                sqrt_dt: dt.sqrt(),
            }),
            Scheme::ExactOu => match model {
                ModelSpec::Ou(ou) => Ok(Stepper::Exact(OuTransition::new(ou, dt)?)),
                _ => Err(Error::Invalid(format!(
                    "exact transitions are only available for OU, not {}",
                    model.name()
                ))),
            },
        }
    }

    /// Advances `x` in place; `xi`, `a`, `b` are scratch buffers of length K.
    fn step<R: Rng + ?Sized>(
        &self,
        x: &mut [f64],
        rng: &mut R,
        xi: &mut [f64],
        a: &mut [f64],
        b: &mut [f64],
    ) {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        match self {
            Stepper::Euler { model, dt, sqrt_dt } => {
                model.drift(x, a);
                model.diffuse(x, xi, b);
                for i in 0..x.len() {
                    x[i] += a[i] * dt + b[i] * sqrt_dt;
                }
            }
            Stepper::Exact(tr) => {
                let k = x.len();
                for i in 0..k {
                    let mut acc = 0.0;
                    for j in 0..k {
                        acc += tr.propagator[(i, j)] * x[j] + tr.noise_factor[(i, j)] * xi[j];
                    }
                    a[i] = acc;
                }
                x.copy_from_slice(a);
            }
        }
    }
}

fn check_grid(dt: f64, nsteps: usize) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if nsteps == 0 {
        return Err(Error::Invalid("number of steps must be at least 1".into()));
    }
    Ok(())
}

fn run(
    model: &ModelSpec,
    scheme: Scheme,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_grid(dt, nsteps)?;
    let k = model.dim();
    check_dim("initial state", k, x0.len())?;
    let stepper = Stepper::new(model, scheme, dt)?;
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let mut data = Vec::with_capacity((nsteps + 1) * k);
    data.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let (mut xi, mut a, mut b) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for step in 1..=nsteps {
        stepper.step(&mut x, &mut rng, &mut xi, &mut a, &mut b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        data.extend_from_slice(&x);
    }
    Ok(Trajectory::new(dt, k, data)?.with_origin(Origin {
        model: model.name().into(),
        seed: Some(seed),
        burn_in: 0,
    }))
}

/// Euler–Maruyama path of `nsteps` steps (the result has `nsteps + 1` rows).
pub fn simulate_unperturbed(
    model: &ModelSpec,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<Trajectory> {
    run(model, Scheme::EulerMaruyama, x0, dt, nsteps, seed)
}

/// Path sampled with the exact OU transition kernel; exact for any `dt`.
pub fn simulate_ou_exact(
    ou: &OuParams,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<Trajectory> {
    run(
        &ModelSpec::Ou(ou.clone()),
        Scheme::ExactOu,
        x0,
        dt,
        nsteps,
        seed,
    )
}

/// Unperturbed path with an explicit scheme.
pub fn simulate_with_scheme(
    model: &ModelSpec,
    scheme: Scheme,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<Trajectory> {
    run(model, scheme, x0, dt, nsteps, seed)
}

/// Draws from the stationary density: exact `N(0, C)` for OU, otherwise an
/// Euler–Maruyama chain recorded every `thin` steps after `burn_in` steps.
pub fn sample_stationary(
    model: &ModelSpec,
    nsamples: usize,
    seed: u64,
    dt: f64,
    burn_in: usize,
    thin: usize,
) -> Result<Vec<StateVector>> {
    if nsamples == 0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(seed, SAMPLING_STREAM);
    if let ModelSpec::Ou(ou) = model {
        let p0 = ou.stationary_density()?;
        return Ok((0..nsamples).map(|_| p0.sample(&mut rng)).collect());
    }
    check_grid(dt, thin.max(1))?;
    let k = model.dim();
    let stepper = Stepper::new(model, Scheme::EulerMaruyama, dt)?;
    let mut x = model.burn_in_start();
    let (mut xi, mut a, mut b) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut out = Vec::with_capacity(nsamples);
    let thin = thin.max(1);
    let total = burn_in + nsamples * thin;
    for step in 1..=total {
        stepper.step(&mut x, &mut rng, &mut xi, &mut a, &mut b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        if step > burn_in && (step - burn_in) % thin == 0 {
            out.push(DVector::from_column_slice(&x));
        }
    }
    Ok(out)
}

/// Ogata thinning: next accepted jump time in `(t, t_max]`.
///
/// `state_at(s)` must return the pre-jump state `x(s-)`.
pub fn next_jump_time<R, F>(
    intensity: &IntensityModel,
    mut state_at: F,
    t: f64,
    t_max: f64,
    rng: &mut R,
) -> Option<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> Vec<f64>,
{
    let bound = intensity.dominating_rate();
    assert!(
        bound.is_finite() && bound > 0.0,
        "dominating rate must be finite and positive"
    );
    let exp = Exp::new(bound).expect("positive rate");
    let mut s = t;
    loop {
        s += rng.sample(exp);
        if s > t_max {
            return None;
        }
        let x = state_at(s);
        if rng.random::<f64>() * bound < intensity.rate(s, &x) {
            return Some(s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub pre_state: StateVector,
    pub z: DVector<f64>,
    pub post_state: StateVector,
}

pub type JumpEvents = Vec<JumpEvent>;

/// Jump-perturbed path: Euler–Maruyama between jumps, jumps from thinning.
///
/// Uses the same noise stream as [`simulate_unperturbed`] for the same seed.
#[allow(clippy::too_many_arguments)]
pub fn simulate_perturbed(
    model: &ModelSpec,
    map: &AffineJumpMap,
    law: &JumpLaw,
    intensity: &IntensityModel,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<(Trajectory, JumpEvents)> {
    simulate_perturbed_with_scheme(
        model,
        Scheme::EulerMaruyama,
        map,
        law,
        intensity,
        x0,
        dt,
        nsteps,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_perturbed_with_scheme(
    model: &ModelSpec,
    scheme: Scheme,
    map: &AffineJumpMap,
    law: &JumpLaw,
    intensity: &IntensityModel,
    x0: &[f64],
    dt: f64,
    nsteps: usize,
    seed: u64,
) -> Result<(Trajectory, JumpEvents)> {
    check_grid(dt, nsteps)?;
    let k = model.dim();
    check_dim("initial state", k, x0.len())?;
    check_dim("jump map", k, map.dim())?;
    check_dim("jump law", map.z_dim(), law.dim())?;
    let bound = intensity.dominating_rate();
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::Invalid(
            "dominating jump rate must be finite and positive".into(),
        ));
    }
    let stepper = Stepper::new(model, scheme, dt)?;
    let mut noise = stream_rng(seed, NOISE_STREAM);
    let mut jumps = stream_rng(seed, JUMP_STREAM);
    let exp = Exp::new(bound).expect("positive rate");

    let mut data = Vec::with_capacity((nsteps + 1) * k);
    data.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let (mut xi, mut a, mut b) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut events = Vec::new();
    let mut candidate: f64 = jumps.sample(exp);
    for step in 1..=nsteps {
        stepper.step(&mut x, &mut noise, &mut xi, &mut a, &mut b);
        let t_next = step as f64 * dt;
        while candidate <= t_next {
            if jumps.random::<f64>() * bound < intensity.rate(candidate, &x) {
                let z = law.sample(&mut jumps);
                let post = map.apply(&x, z.as_slice())?;
                events.push(JumpEvent {
                    time: candidate,
                    pre_state: DVector::from_column_slice(&x),
                    z,
                    post_state: post.clone(),
                });
                x.copy_from_slice(post.as_slice());
            }
            candidate += jumps.sample(exp);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        data.extend_from_slice(&x);
    }
    let traj = Trajectory::new(dt, k, data)?.with_origin(Origin {
        model: model.name().into(),
        seed: Some(seed),
        burn_in: 0,
    });
    Ok((traj, events))
}
