//! Monte Carlo ground truth: perturbed minus unperturbed ensemble averages.
//!
//! Members are independent and run in parallel. Results are reduced chunk by
//! chunk and the chunk statistics merged in a fixed pairwise tree, so curves
//! are bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::estimators::{estimate_tcorr, ResponseCurve, TestFunction};
use crate::model::{AffineJumpMap, IntensityModel, JumpLaw, StateVector, Trajectory};
use crate::sde::{
    member_seed, sample_stationary, simulate_perturbed_with_scheme, simulate_with_scheme,
    stream_rng, ModelSpec, Scheme, SAMPLING_STREAM,
};

const CHUNK: usize = 64;
const PILOT_STEPS: usize = 200_000;
const PILOT_BURN_IN: usize = 20_000;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub members: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Share Brownian paths between the perturbed and unperturbed member.
    pub common_noise: bool,
    /// Output every `record_every` steps.
    pub record_every: usize,
    pub scheme: Scheme,
}

impl EnsembleConfig {
    pub fn new(members: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            members,
            dt,
            horizon,
            seed,
            common_noise: true,
            record_every: 1,
            scheme: Scheme::EulerMaruyama,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(Error::Invalid(format!(
                "ensemble needs at least 2 members, got {}",
                self.members
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.horizon.is_finite() && self.horizon > 0.0)
        {
            return Err(Error::Invalid(
                "ensemble dt and horizon must be positive".into(),
            ));
        }
        let n = self.horizon / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::Invalid(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        if self.record_every == 0 || self.nsteps() % self.record_every != 0 {
            return Err(Error::Invalid(
                "record_every must divide the number of steps".into(),
            ));
        }
        Ok(())
    }

    pub fn nsteps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Output times `0, record_every * dt, ..., horizon`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.nsteps() / self.record_every)
            .map(|i| (i * self.record_every) as f64 * self.dt)
            .collect()
    }

    fn pair_seeds(&self, i: usize) -> (u64, u64) {
        let s = member_seed(self.seed, i as u64);
        let u = if self.common_noise {
            s
        } else {
            member_seed(!self.seed, i as u64)
        };
        (s, u)
    }
}

/// `n` draws from the stationary density. OU is sampled exactly; other models
/// are burned in for `100 T_corr` and thinned every `10 T_corr`, with `T_corr`
/// from a pilot run.
pub fn stationary_initial_states(
    model: &ModelSpec,
    n: usize,
    seed: u64,
    dt: f64,
) -> Result<Vec<StateVector>> {
    if let ModelSpec::Ou(_) = model {
        return sample_stationary(model, n, seed, dt, 0, 1);
    }
    let pilot = sample_stationary(model, PILOT_STEPS, seed ^ 0x5EED_F00D, dt, PILOT_BURN_IN, 1)?;
    let data: Vec<f64> = pilot.iter().flat_map(|x| x.iter().copied()).collect();
    let traj = Trajectory::new(dt, model.dim(), data)?;
    let tcorr = estimate_tcorr(&traj)?.tcorr;
    let burn_in = (100.0 * tcorr / dt).ceil() as usize;
    let thin = ((10.0 * tcorr / dt).ceil() as usize).max(1);
    log::info!("stationary sampling: T_corr = {tcorr:.4}, burn-in {burn_in}, thinning {thin}");
    sample_stationary(model, n, seed, dt, burn_in, thin)
}

#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn empty(len: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let mut out = Self::empty(a.mean.len());
        out.n = n;
        for i in 0..a.mean.len() {
            let d = b.mean[i] - a.mean[i];
            out.mean[i] = a.mean[i] + d * b.n / n;
            out.m2[i] = a.m2[i] + b.m2[i] + d * d * a.n * b.n / n;
        }
        out
    }
}

fn tree_merge(mut parts: Vec<Moments>) -> Moments {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => Moments::merge(a, b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one part")
}

/// Runs `member(i, x0)` -> (perturbed, unperturbed) for every member and
/// averages `psi(perturbed) - psi(unperturbed)` at the output times.
fn run_ensemble<F>(
    model: &ModelSpec,
    psi: TestFunction,
    cfg: &EnsembleConfig,
    member: F,
) -> Result<ResponseCurve>
where
    F: Fn(usize, &[f64]) -> Result<(Trajectory, Trajectory)> + Sync,
{
    cfg.validate()?;
    let k = model.dim();
    psi.validate(k)?;
    let width = psi.width(k);
    let times = cfg.times();
    let len = times.len() * width;
    let x0s = stationary_initial_states(model, cfg.members, cfg.seed, cfg.dt)?;
    let chunks: Vec<Result<Moments>> = x0s
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, xs)| {
            let mut acc = Moments::empty(len);
            let mut diff = vec![0.0; len];
            let (mut a, mut b) = (vec![0.0; width], vec![0.0; width]);
            for (j, x0) in xs.iter().enumerate() {
                let (pert, unpert) = member(c * CHUNK + j, x0.as_slice())?;
                for (ti, out) in diff.chunks_exact_mut(width).enumerate() {
                    let row = ti * cfg.record_every;
                    psi.eval_into(pert.row(row), &mut a);
                    psi.eval_into(unpert.row(row), &mut b);
                    for ((o, p), u) in out.iter_mut().zip(&a).zip(&b) {
                        *o = p - u;
                    }
                }
                acc.push(&diff);
            }
            Ok(acc)
        })
        .collect();
    let total = tree_merge(chunks.into_iter().collect::<Result<Vec<_>>>()?);
    let n = total.n;
    let values = total
        .mean
        .chunks_exact(width)
        .map(<[f64]>::to_vec)
        .collect();
    let stderr = total
        .m2
        .chunks_exact(width)
        .map(|c| c.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect())
        .collect();
    ResponseCurve::new(times, values, stderr)
}

/// Response to the deterministic jump `x -> x + h(x)` applied at time 0.
pub fn mc_det_jump_response(
    model: &ModelSpec,
    map: &AffineJumpMap,
    psi: TestFunction,
    cfg: &EnsembleConfig,
) -> Result<ResponseCurve> {
    check_dim("jump map", model.dim(), map.dim())?;
    if !map.is_z_free() {
        return Err(Error::Invalid(
            "deterministic jump needs a map without z coupling".into(),
        ));
    }
    let z = vec![0.0; map.z_dim()];
    let n = cfg.nsteps();
    run_ensemble(model, psi, cfg, |i, x0| {
        let (sp, su) = cfg.pair_seeds(i);
        let x1 = map.apply(x0, &z)?;
        let pert = simulate_with_scheme(model, cfg.scheme, x1.as_slice(), cfg.dt, n, sp)?;
        let unpert = simulate_with_scheme(model, cfg.scheme, x0, cfg.dt, n, su)?;
        Ok((pert, unpert))
    })
}

/// Response to a random jump `x -> x + h(x, z)`, `z ~ law`, at time 0.
pub fn mc_random_jump_response(
    model: &ModelSpec,
    map: &AffineJumpMap,
    law: &JumpLaw,
    psi: TestFunction,
    cfg: &EnsembleConfig,
) -> Result<ResponseCurve> {
    check_dim("jump map", model.dim(), map.dim())?;
    check_dim("jump law", map.z_dim(), law.dim())?;
    let n = cfg.nsteps();
    run_ensemble(model, psi, cfg, |i, x0| {
        let (sp, su) = cfg.pair_seeds(i);
        let z = law.sample(&mut stream_rng(sp, SAMPLING_STREAM));
        let x1 = map.apply(x0, z.as_slice())?;
        let pert = simulate_with_scheme(model, cfg.scheme, x1.as_slice(), cfg.dt, n, sp)?;
        let unpert = simulate_with_scheme(model, cfg.scheme, x0, cfg.dt, n, su)?;
        Ok((pert, unpert))
    })
}

/// Response to jumps at the random times of the conditional intensity.
pub fn mc_random_time_response(
    model: &ModelSpec,
    map: &AffineJumpMap,
    law: &JumpLaw,
    intensity: &IntensityModel,
    psi: TestFunction,
    cfg: &EnsembleConfig,
) -> Result<ResponseCurve> {
    check_dim("jump map", model.dim(), map.dim())?;
    check_dim("jump law", map.z_dim(), law.dim())?;
    let n = cfg.nsteps();
    run_ensemble(model, psi, cfg, |i, x0| {
        let (sp, su) = cfg.pair_seeds(i);
        let (pert, _) = simulate_perturbed_with_scheme(
            model, cfg.scheme, map, law, intensity, x0, cfg.dt, n, sp,
        )?;
        let unpert = simulate_with_scheme(model, cfg.scheme, x0, cfg.dt, n, su)?;
        Ok((pert, unpert))
    })
}
