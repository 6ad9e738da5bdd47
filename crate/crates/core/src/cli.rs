//! Command-line front end. Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use crate::ensemble::{mc_det_jump_response, mc_random_jump_response, mc_random_time_response};
use crate::error::{Error, Result};
use crate::estimators::{
    accuracy_diagnostic, autocorrelation, convolve_response, det_jump_response, estimate_tcorr,
    random_jump_response, response_operator, ResponseCurve, TestFunction, Verdict,
};
use crate::integrals::{JumpIntegral, JumpIntegralSpec};
use crate::io::{
    read_curve, read_trajectory, write_curve, write_curve_to, write_trajectory, DensityConfig,
    EstimatorKind, ExperimentConfig,
};
use crate::model::{
    fit_gaussian_mixture, fit_quasi_gaussian, Density, IntensityShape, Origin, TimeProfile,
    Trajectory,
};
use crate::oracle::{
    ou_exact_perturbed_mean, ou_mean_response_det, ou_mean_response_random, ou_response_operator,
};
use crate::sde::{sample_stationary, simulate_with_scheme, ModelSpec};

#[derive(Debug, Parser)]
#[command(
    name = "jumpfdt",
    version,
    about = "Response of stochastic systems to finite jumps"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (default: configured output, else stdout where possible).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an unperturbed trajectory.
    Simulate(Common),
    /// Run a response estimator on a trajectory.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Trajectory file; simulated from the config when absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Analytic OU response curves.
    Oracle(Common),
    /// Ensemble Monte Carlo response.
    Mc(Common),
    /// Per-lag differences of two curves in standard-error units.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Autocorrelation, decorrelation time and the alpha * T_corr check.
    Acf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::warn!("thread pool already initialised; --threads ignored");
        }
    }
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, u64, Option<PathBuf>)> {
    let cfg = ExperimentConfig::from_path(&common.config)?;
    let seed = common.seed.unwrap_or(cfg.seed);
    let out = common.out.clone().or_else(|| cfg.output.clone());
    Ok((cfg, seed, out))
}

fn emit_curve(curve: &ResponseCurve, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_curve(p, curve),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_curve_to(&mut lock, curve)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(common) => {
            let (cfg, seed, out) = load(&common)?;
            let out = out.ok_or_else(|| Error::Invalid("simulate needs --out".into()))?;
            let traj = simulate_from_config(&cfg, seed)?;
            write_trajectory(&out, &traj)
        }
        Command::Estimate { common, trajectory } => {
            let (cfg, seed, out) = load(&common)?;
            let traj = trajectory_for(&cfg, trajectory.as_deref(), seed)?;
            let curve = estimate(&cfg, &traj)?;
            emit_curve(&curve, out.as_deref())
        }
        Command::Oracle(common) => {
            let (cfg, _, out) = load(&common)?;
            emit_curve(&oracle(&cfg)?, out.as_deref())
        }
        Command::Mc(common) => {
            let (cfg, seed, out) = load(&common)?;
            emit_curve(&monte_carlo(&cfg, seed)?, out.as_deref())
        }
        Command::Compare { a, b, out } => {
            compare(&read_curve(&a)?, &read_curve(&b)?, out.as_deref())
        }
        Command::Acf { common, trajectory } => {
            let (cfg, seed, out) = load(&common)?;
            let traj = trajectory_for(&cfg, trajectory.as_deref(), seed)?;
            acf(&cfg, &traj, out.as_deref())
        }
    }
}

/// Unperturbed trajectory described by the `trajectory` section, with the
/// burn-in dropped.
pub fn simulate_from_config(cfg: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    let t = cfg
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::Invalid("config has no `trajectory` section".into()))?;
    let model = cfg.model()?;
    let x0 = match (&t.x0, &model) {
        (Some(x), _) => x.clone(),
        (None, ModelSpec::Ou(_)) => sample_stationary(&model, 1, seed, t.dt, 0, 1)?[0]
            .as_slice()
            .to_vec(),
        (None, _) => vec![0.0; model.dim()],
    };
    let full = simulate_with_scheme(
        &model,
        t.scheme.into(),
        &x0,
        t.dt,
        t.steps + t.burn_in,
        seed,
    )?;
    let mut traj = full.skip(t.burn_in)?;
    traj.origin = Origin {
        model: model.name().into(),
        seed: Some(seed),
        burn_in: t.burn_in,
    };
    Ok(traj)
}

fn trajectory_for(cfg: &ExperimentConfig, path: Option<&Path>, seed: u64) -> Result<Trajectory> {
    match path.or(cfg.input.as_deref()) {
        Some(p) => read_trajectory(p),
        None => simulate_from_config(cfg, seed),
    }
}

/// Stationary density used by the estimators: exact for OU unless configured
/// otherwise, quasi-Gaussian by default for other models.
pub fn stationary_density(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Density> {
    let model = cfg.model()?;
    let choice = cfg.p0.unwrap_or(match model {
        ModelSpec::Ou(_) => DensityConfig::Exact,
        _ => DensityConfig::QuasiGaussian,
    });
    match (choice, &model) {
        (DensityConfig::Exact, ModelSpec::Ou(ou)) => Ok(ou.stationary_density()?.into()),
        (DensityConfig::Exact, _) => {
            Err(Error::Invalid("exact p0 is only available for OU".into()))
        }
        (DensityConfig::QuasiGaussian, _) => Ok(fit_quasi_gaussian(traj)?.into()),
        (DensityConfig::Mixture(n), _) => fit_gaussian_mixture(traj, n, 10, 200),
    }
}

/// Runs the configured estimator on `traj`.
pub fn estimate(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<ResponseCurve> {
    let map = cfg.require_jump_map()?;
    let psi = cfg.psi();
    let lags = cfg.lags()?;
    let p0 = stationary_density(cfg, traj)?;
    match cfg.estimator {
        EstimatorKind::Deterministic => det_jump_response(traj, &p0, &map, psi, &lags),
        EstimatorKind::Random => {
            let j = JumpIntegral::new(JumpIntegralSpec::new(
                p0.clone(),
                map,
                cfg.jump_law()?,
                None,
            )?)?;
            random_jump_response(traj, &p0, &j, psi, &lags)
        }
        EstimatorKind::RandomTime => {
            let intensity = cfg.require_intensity()?;
            let shape = intensity.shape.clone();
            let jg = JumpIntegral::new(JumpIntegralSpec::new(
                p0.clone(),
                map,
                cfg.jump_law()?,
                Some(shape.clone()),
            )?)?;
            let r = response_operator(traj, &p0, &jg, &shape, psi, &lags)?;
            match cfg.times()? {
                Some(times) => convolve_response(&r, &intensity.eta, intensity.alpha, &times),
                None => Ok(r),
            }
        }
    }
}

/// Analytic OU curve for the configured scenario (`psi` must be the identity).
pub fn oracle(cfg: &ExperimentConfig) -> Result<ResponseCurve> {
    let ModelSpec::Ou(ou) = cfg.model()? else {
        return Err(Error::Invalid(
            "oracle curves exist only for the OU model".into(),
        ));
    };
    if cfg.psi() != TestFunction::Identity {
        return Err(Error::Invalid(
            "oracle curves are for psi = identity".into(),
        ));
    }
    let map = cfg.require_jump_map()?;
    let law = cfg.jump_law()?;
    match cfg.estimator {
        EstimatorKind::Deterministic => ou_mean_response_det(&ou, &map, &cfg.lags()?),
        EstimatorKind::Random => ou_mean_response_random(&ou, &map, &law, &cfg.lags()?),
        EstimatorKind::RandomTime => {
            let intensity = cfg.require_intensity()?;
            match cfg.times()? {
                Some(times) => {
                    let rate = match (&intensity.eta, &intensity.shape) {
                        (TimeProfile::Constant(c), IntensityShape::Constant) => intensity.alpha * c,
                        _ => {
                            return Err(Error::Invalid(
                                "exact perturbed mean needs constant eta and g = 1".into(),
                            ))
                        }
                    };
                    let zbar: DVector<f64> = law.mean();
                    let pm = ou_exact_perturbed_mean(&ou, &map, &zbar, rate, &times)?;
                    if pm.unbounded {
                        log::warn!("L - alpha H is not positive-stable; the perturbed mean grows without bound");
                    }
                    Ok(pm.curve)
                }
                None => ou_response_operator(&ou, &map, &law, &intensity.shape, &cfg.lags()?),
            }
        }
    }
}

/// Ensemble Monte Carlo for the configured scenario.
pub fn monte_carlo(cfg: &ExperimentConfig, seed: u64) -> Result<ResponseCurve> {
    let ens = cfg
        .ensemble_config(seed)?
        .ok_or_else(|| Error::Invalid("config has no `ensemble` section".into()))?;
    let model = cfg.model()?;
    let map = cfg.require_jump_map()?;
    let psi = cfg.psi();
    match cfg.estimator {
        EstimatorKind::Deterministic => mc_det_jump_response(&model, &map, psi, &ens),
        EstimatorKind::Random => mc_random_jump_response(&model, &map, &cfg.jump_law()?, psi, &ens),
        EstimatorKind::RandomTime => mc_random_time_response(
            &model,
            &map,
            &cfg.jump_law()?,
            &cfg.require_intensity()?,
            psi,
            &ens,
        ),
    }
}

fn compare(a: &ResponseCurve, b: &ResponseCurve, out: Option<&Path>) -> Result<()> {
    if a.width() != b.width() {
        return Err(Error::Invalid(format!(
            "curves have {} and {} outputs",
            a.width(),
            b.width()
        )));
    }
    let j = a.width();
    let mut text = String::from("lag");
    (1..=j).for_each(|i| text.push_str(&format!(",diff_{i}")));
    (1..=j).for_each(|i| text.push_str(&format!(",z_{i}")));
    text.push('\n');
    let mut joined = 0;
    for (ia, lag) in a.lags.iter().enumerate() {
        let Some(ib) = b.index_of(*lag) else { continue };
        joined += 1;
        let diffs: Vec<f64> = (0..j).map(|c| a.values[ia][c] - b.values[ib][c]).collect();
        let zs: Vec<f64> = (0..j)
            .map(|c| {
                let se = a.stderr[ia][c].hypot(b.stderr[ib][c]);
                match (diffs[c], se) {
                    (d, _) if d == 0.0 => 0.0,
                    (d, s) if s > 0.0 => d / s,
                    (d, _) => d.signum() * f64::INFINITY,
                }
            })
            .collect();
        text.push_str(&format!("{lag:?}"));
        diffs
            .iter()
            .chain(&zs)
            .for_each(|v| text.push_str(&format!(",{v:?}")));
        text.push('\n');
    }
    if joined == 0 {
        return Err(Error::Invalid("curves share no lags".into()));
    }
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn acf(cfg: &ExperimentConfig, traj: &Trajectory, out: Option<&Path>) -> Result<()> {
    let est = estimate_tcorr(traj)?;
    let lags = match &cfg.lags {
        Some(_) => cfg.lags()?,
        None => {
            let n = (est.cutoff / traj.dt()).round() as usize;
            let step = n.div_ceil(200).max(1);
            (0..=n)
                .step_by(step)
                .map(|i| i as f64 * traj.dt())
                .collect()
        }
    };
    let a = autocorrelation(traj, &lags)?;
    let k = traj.dim();
    let mut text = String::from("lag");
    for prefix in ["c", "se"] {
        for i in 1..=k {
            for j in 1..=k {
                text.push_str(&format!(",{prefix}_{i}_{j}"));
            }
        }
    }
    text.push('\n');
    for ((lag, v), s) in a.lags.iter().zip(&a.values).zip(&a.stderr) {
        text.push_str(&format!("{lag:?}"));
        for m in [v, s] {
            for i in 0..k {
                for j in 0..k {
                    text.push_str(&format!(",{:?}", m[(i, j)]));
                }
            }
        }
        text.push('\n');
    }
    write_text(&text, out)?;
    eprintln!(
        "T_corr = {:.6} (integrated to lag {:.6})",
        est.tcorr, est.cutoff
    );
    if let Some(i) = cfg.intensity()? {
        let (ratio, verdict) = accuracy_diagnostic(i.alpha, est.tcorr)?;
        let v = match verdict {
            Verdict::Ok => "ok",
            Verdict::Warn => "warn",
        };
        eprintln!("alpha * T_corr = {ratio:.6}: {v}");
    }
    Ok(())
}
