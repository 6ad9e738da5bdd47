//! JSON experiment configuration. See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::ensemble::EnsembleConfig;
use crate::error::{check_dim, Error, Result};
use crate::estimators::TestFunction;
use crate::model::{
    AffineJumpMap, GaussianBump, GaussianDensity, GaussianMixture, IntensityModel, IntensityShape,
    JumpLaw, TimeProfile,
};
use crate::oracle::OuParams;
use crate::sde::{ModelSpec, Scheme};

type Matrix = Vec<Vec<f64>>;

fn matrix(rows: &Matrix, what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Invalid(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Ou { l: Matrix, g: Matrix },
    DoubleWell { sigma: f64 },
    Lorenz96 { k: usize, forcing: f64, sigma: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub h: Vec<f64>,
    #[serde(default, rename = "H")]
    pub h_mat: Option<Matrix>,
    #[serde(default, rename = "H_star")]
    pub h_star: Option<Matrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianConfig {
    fn build(&self, what: &str) -> Result<GaussianDensity> {
        GaussianDensity::new(vector(&self.mean), matrix(&self.cov, what)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Discrete {
        atoms: Matrix,
        probs: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        cov: Matrix,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<GaussianConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Constant,
    Bump {
        center: Vec<f64>,
        cov: Matrix,
    },
    BumpMixture {
        weights: Vec<f64>,
        bumps: Vec<GaussianConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EtaConfig {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityConfig {
    pub alpha: f64,
    #[serde(default)]
    pub eta: Option<EtaConfig>,
    #[serde(default)]
    pub shape: Option<ShapeConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiConfig {
    Identity,
    Energy,
    Component(usize),
    Quadratic(usize, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Deterministic jump at time 0.
    #[default]
    Deterministic,
    /// Random jump `h(x, z)` at time 0.
    Random,
    /// Jumps at the random times of the intensity model.
    RandomTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityConfig {
    /// Exact stationary density (OU only).
    Exact,
    /// Gaussian with the trajectory's mean and covariance.
    #[default]
    QuasiGaussian,
    /// Gaussian mixture fitted by EM.
    Mixture(usize),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self, what: &str) -> Result<Vec<f64>> {
        match (&self.values, self.step, self.max) {
            (Some(v), None, None) => Ok(v.clone()),
            (None, Some(step), Some(max)) if step > 0.0 && max >= 0.0 => {
                let n = (max / step).round() as usize;
                Ok((0..=n).map(|i| i as f64 * step).collect())
            }
            _ => Err(Error::Invalid(format!(
                "{what}: give either `values` or positive `step` and `max`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    #[default]
    Euler,
    Exact,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Self {
        match s {
            SchemeConfig::Euler => Scheme::EulerMaruyama,
            SchemeConfig::Exact => Scheme::ExactOu,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub members: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "yes")]
    pub common_noise: bool,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub scheme: SchemeConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub jump: Option<JumpConfig>,
    #[serde(default)]
    pub law: Option<LawConfig>,
    #[serde(default)]
    pub intensity: Option<IntensityConfig>,
    #[serde(default)]
    pub psi: Option<PsiConfig>,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub p0: Option<DensityConfig>,
    #[serde(default)]
    pub lags: Option<GridConfig>,
    #[serde(default)]
    pub times: Option<GridConfig>,
    #[serde(default)]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(e) => Error::Format(format!("{}: {e}", path.display())),
            other => other,
        })
    }

    /// Builds every configured component and checks their dimensions.
    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        let k = model.dim();
        if let Some(map) = self.jump_map()? {
            check_dim("jump map", k, map.dim())?;
            check_dim("jump law", map.z_dim(), self.jump_law()?.dim())?;
        }
        if let Some(i) = self.intensity()? {
            if let Some(d) = i.shape.dim() {
                check_dim("intensity shape", k, d)?;
            }
        }
        self.psi().validate(k)?;
        if let Some(l) = &self.lags {
            l.build("lags")?;
        }
        if let Some(t) = &self.times {
            t.build("times")?;
        }
        if let Some(t) = &self.trajectory {
            if let Some(x0) = &t.x0 {
                check_dim("initial state", k, x0.len())?;
            }
        }
        if let Some(e) = self.ensemble_config(self.seed)? {
            e.validate()?;
        }
        if self.p0 == Some(DensityConfig::Exact) && !matches!(model, ModelSpec::Ou(_)) {
            return Err(Error::Invalid(
                "exact p0 is only available for the OU model".into(),
            ));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec> {
        match &self.model {
            ModelConfig::Ou { l, g } => Ok(ModelSpec::Ou(OuParams::new(
                matrix(l, "model.l")?,
                matrix(g, "model.g")?,
            )?)),
            ModelConfig::DoubleWell { sigma } => ModelSpec::double_well(*sigma),
            ModelConfig::Lorenz96 { k, forcing, sigma } => {
                ModelSpec::lorenz96(*k, *forcing, *sigma)
            }
        }
    }

    pub fn jump_map(&self) -> Result<Option<AffineJumpMap>> {
        let Some(j) = &self.jump else { return Ok(None) };
        let k = j.h.len();
        let h_mat = match &j.h_mat {
            Some(m) => matrix(m, "jump.H")?,
            None => DMatrix::zeros(k, k),
        };
        let h_star = match &j.h_star {
            Some(m) => matrix(m, "jump.H_star")?,
            None => DMatrix::zeros(k, 0),
        };
        AffineJumpMap::new(vector(&j.h), h_mat, h_star).map(Some)
    }

    /// Jump map, required.
    pub fn require_jump_map(&self) -> Result<AffineJumpMap> {
        self.jump_map()?
            .ok_or_else(|| Error::Invalid("config has no `jump` section".into()))
    }

    /// Jump law; a point mass at `0` when absent.
    pub fn jump_law(&self) -> Result<JumpLaw> {
        match &self.law {
            None => {
                let d = self.jump_map()?.map_or(0, |m| m.z_dim());
                Ok(JumpLaw::point(DVector::zeros(d)))
            }
            Some(LawConfig::Discrete { atoms, probs }) => {
                JumpLaw::discrete(atoms.iter().map(|a| vector(a)).collect(), probs.clone())
            }
            Some(LawConfig::Gaussian { mean, cov }) => Ok(JumpLaw::Gaussian(GaussianDensity::new(
                vector(mean),
                matrix(cov, "law.cov")?,
            )?)),
            Some(LawConfig::Mixture {
                weights,
                components,
            }) => {
                let comps = components
                    .iter()
                    .map(|c| c.build("law component"))
                    .collect::<Result<_>>()?;
                Ok(JumpLaw::Mixture(GaussianMixture::new(
                    weights.clone(),
                    comps,
                )?))
            }
        }
    }

    pub fn intensity(&self) -> Result<Option<IntensityModel>> {
        let Some(i) = &self.intensity else {
            return Ok(None);
        };
        let eta = match &i.eta {
            None => TimeProfile::Constant(1.0),
            Some(EtaConfig::Constant(v)) => TimeProfile::Constant(*v),
            Some(EtaConfig::Table(t)) => TimeProfile::Table(t.clone()),
        };
        let shape = match &i.shape {
            None | Some(ShapeConfig::Constant) => IntensityShape::Constant,
            Some(ShapeConfig::Bump { center, cov }) => IntensityShape::Bump(GaussianBump::new(
                vector(center),
                matrix(cov, "shape.cov")?,
            )?),
            Some(ShapeConfig::BumpMixture { weights, bumps }) => {
                let bs = bumps
                    .iter()
                    .map(|b| GaussianBump::new(vector(&b.mean), matrix(&b.cov, "shape bump")?))
                    .collect::<Result<_>>()?;
                IntensityShape::bump_mixture(weights.clone(), bs)?
            }
        };
        IntensityModel::new(i.alpha, eta, shape).map(Some)
    }

    pub fn require_intensity(&self) -> Result<IntensityModel> {
        self.intensity()?
            .ok_or_else(|| Error::Invalid("config has no `intensity` section".into()))
    }

    pub fn psi(&self) -> TestFunction {
        match self.psi.unwrap_or(PsiConfig::Identity) {
            PsiConfig::Identity => TestFunction::Identity,
            PsiConfig::Energy => TestFunction::Energy,
            PsiConfig::Component(i) => TestFunction::Component { i },
            PsiConfig::Quadratic(i, j) => TestFunction::Quadratic { i, j },
        }
    }

    pub fn lags(&self) -> Result<Vec<f64>> {
        self.lags
            .as_ref()
            .ok_or_else(|| Error::Invalid("config has no `lags` grid".into()))?
            .build("lags")
    }

    pub fn times(&self) -> Result<Option<Vec<f64>>> {
        self.times.as_ref().map(|t| t.build("times")).transpose()
    }

    pub fn ensemble_config(&self, seed: u64) -> Result<Option<EnsembleConfig>> {
        let Some(e) = &self.ensemble else {
            return Ok(None);
        };
        let cfg = EnsembleConfig {
            members: e.members,
            dt: e.dt,
            horizon: e.horizon,
            seed,
            common_noise: e.common_noise,
            record_every: e.record_every,
            scheme: e.scheme.into(),
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"type": "ou", "l": [[2.0]], "g": [[2.0]]},
        "jump": {"h": [1.0]},
        "lags": {"step": 0.25, "max": 1.0}
    }"#;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.lags().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(cfg.require_jump_map().unwrap().is_z_free());
        assert_eq!(cfg.psi(), TestFunction::Identity);
    }

    #[test]
    fn errors_carry_position() {
        let bad = "{\n  \"model\": {\"type\": \"ou\", \"l\": [[2.0]], \"g\": [[2.0]]},\n  \"bogus\": 1\n}";
        let msg = ExperimentConfig::from_json(bad).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bad =
            r#"{"model": {"type": "ou", "l": [[2.0]], "g": [[2.0]]}, "jump": {"h": [1.0, 0.0]}}"#;
        assert!(matches!(
            ExperimentConfig::from_json(bad),
            Err(Error::Dimension { .. })
        ));
    }
}
