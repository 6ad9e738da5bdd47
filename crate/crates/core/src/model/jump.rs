//! Jump maps `x -> x + h(x, z)` and the laws of the random jump parameter `z`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::density::{pick_index, GaussianDensity, GaussianMixture, WEIGHT_SUM_TOL};
use crate::error::{check_dim, Error, Result};

/// Affine jump `h(x, z) = h + H x + H* z`.
///
/// The post-jump state is `(I + H) x + h + H* z`; the map is stored together
/// with `(I + H)^{-1}` so that pulling a state back through the jump is a
/// matrix-vector product.
#[derive(Debug, Clone)]
pub struct AffineJumpMap {
    h: DVector<f64>,
    h_mat: DMatrix<f64>,
    h_star: DMatrix<f64>,
    inv: DMatrix<f64>,
    abs_det: f64,
}

impl AffineJumpMap {
    pub fn new(h: DVector<f64>, h_mat: DMatrix<f64>, h_star: DMatrix<f64>) -> Result<Self> {
        let k = h.len();
        if k == 0 {
            return Err(Error::Invalid("jump map of dimension 0".into()));
        }
        check_dim("jump matrix H rows", k, h_mat.nrows())?;
        check_dim("jump matrix H columns", k, h_mat.ncols())?;
        check_dim("jump matrix H* rows", k, h_star.nrows())?;
        if h.iter()
            .chain(h_mat.iter())
            .chain(h_star.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Invalid("non-finite jump map entry".into()));
        }
        let i_plus_h = DMatrix::identity(k, k) + &h_mat;
        let det = i_plus_h.determinant();
        let scale = i_plus_h.amax().max(1.0).powi(k as i32);
        if !(det.abs() > 1e-12 * scale) {
            return Err(Error::NonInvertibleJump { det });
        }
        let inv = i_plus_h
            .try_inverse()
            .ok_or(Error::NonInvertibleJump { det })?;
        Ok(Self {
            h,
            h_mat,
            h_star,
            inv,
            abs_det: det.abs(),
        })
    }

    /// Deterministic jump `h + H x` (no `z` dependence).
    pub fn deterministic(h: DVector<f64>, h_mat: DMatrix<f64>) -> Result<Self> {
        let k = h.len();
        Self::new(h, h_mat, DMatrix::zeros(k, 0))
    }

    /// Constant shift `x -> x + h`.
    pub fn shift(h: DVector<f64>) -> Result<Self> {
        let k = h.len();
        Self::deterministic(h, DMatrix::zeros(k, k))
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// Dimension `d` of the jump parameter.
    pub fn z_dim(&self) -> usize {
        self.h_star.ncols()
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn h_mat(&self) -> &DMatrix<f64> {
        &self.h_mat
    }

    pub fn h_star(&self) -> &DMatrix<f64> {
        &self.h_star
    }

    /// `(I + H)^{-1}`.
    pub fn inverse_linear(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn abs_det(&self) -> f64 {
        self.abs_det
    }

    /// Jacobian `|det (I + H)|^{-1}` of the inverse jump.
    pub fn jacobian(&self) -> f64 {
        1.0 / self.abs_det
    }

    /// True when `z` cannot influence the jump.
    pub fn is_z_free(&self) -> bool {
        self.h_star.iter().all(|v| *v == 0.0)
    }

    /// `h + H* z`, the part of the jump that does not depend on `x`.
    pub fn offset(&self, z: &[f64]) -> Result<DVector<f64>> {
        check_dim("jump parameter z", self.z_dim(), z.len())?;
        let mut off = self.h.clone();
        if !z.is_empty() {
            off += &self.h_star * DVector::from_column_slice(z);
        }
        Ok(off)
    }

    /// Returns `x + h + H x + H* z`.
    pub fn apply(&self, x: &[f64], z: &[f64]) -> Result<DVector<f64>> {
        check_dim("state", self.dim(), x.len())?;
        let x = DVector::from_column_slice(x);
        let hx = &self.h_mat * &x;
        Ok(x + hx + self.offset(z)?)
    }

    /// Pull-back `(I + H)^{-1}(x - h - H* z)` and its Jacobian.
    pub fn invert(&self, x: &[f64], z: &[f64]) -> Result<(DVector<f64>, f64)> {
        check_dim("state", self.dim(), x.len())?;
        let off = self.offset(z)?;
        let mut out = vec![0.0; self.dim()];
        self.invert_with_offset(x, off.as_slice(), &mut out);
        Ok((DVector::from_vec(out), self.jacobian()))
    }

    /// Hot-path pull-back with a precomputed offset `h + H* z`.
    pub(crate) fn invert_with_offset(&self, x: &[f64], offset: &[f64], out: &mut [f64]) {
        let k = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..k {
                acc += self.inv[(i, j)] * (x[j] - offset[j]);
            }
            *o = acc;
        }
    }

    /// The deterministic map obtained by fixing `z`.
    pub fn fold_z(&self, z: &[f64]) -> Result<Self> {
        Self::deterministic(self.offset(z)?, self.h_mat.clone())
    }
}

/// Law `nu` of the jump parameter `z`.
#[derive(Debug, Clone)]
pub enum JumpLaw {
    Discrete {
        atoms: Vec<DVector<f64>>,
        probs: Vec<f64>,
    },
    Gaussian(GaussianDensity),
    Mixture(GaussianMixture),
}

impl JumpLaw {
    pub fn discrete(atoms: Vec<DVector<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::Invalid(
                "discrete law needs as many probabilities as atoms".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Invalid(
                "discrete law probabilities must be nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invalid(format!(
                "discrete law probabilities sum to {sum}, expected 1"
            )));
        }
        let d = atoms[0].len();
        for (i, a) in atoms.iter().enumerate() {
            check_dim("discrete atom", d, a.len())?;
            if atoms[..i].iter().any(|b| b == a) {
                return Err(Error::Invalid(format!(
                    "duplicate atom {i} in discrete law"
                )));
            }
        }
        Ok(JumpLaw::Discrete { atoms, probs })
    }

    /// Single atom at `z`.
    pub fn point(z: DVector<f64>) -> Self {
        JumpLaw::Discrete {
            atoms: vec![z],
            probs: vec![1.0],
        }
    }

    /// Law of an empty parameter, for `z`-free jumps.
    pub fn none() -> Self {
        Self::point(DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        match self {
            JumpLaw::Discrete { atoms, .. } => atoms[0].len(),
            JumpLaw::Gaussian(g) => g.dim(),
            JumpLaw::Mixture(m) => m.dim(),
        }
    }

    /// Mean `z̄` of the law.
    pub fn mean(&self) -> DVector<f64> {
        match self {
            JumpLaw::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .fold(DVector::zeros(self.dim()), |acc, (a, p)| acc + a * *p),
            JumpLaw::Gaussian(g) => g.mean().clone(),
            JumpLaw::Mixture(m) => m.mean(),
        }
    }

    /// Gaussian components with weights, or `None` for a discrete law.
    pub fn gaussian_components(&self) -> Option<GaussianMixture> {
        match self {
            JumpLaw::Discrete { .. } => None,
            JumpLaw::Gaussian(g) => Some(GaussianMixture::single(g.clone())),
            JumpLaw::Mixture(m) => Some(m.clone()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            JumpLaw::Discrete { atoms, probs } => {
                if atoms.len() == 1 {
                    atoms[0].clone()
                } else {
                    atoms[pick_index(probs, rng)].clone()
                }
            }
            JumpLaw::Gaussian(g) => g.sample(rng),
            JumpLaw::Mixture(m) => m.sample(rng),
        }
    }
}

/// Direction used by the energy-preserving collision jump.
#[derive(Debug, Clone)]
pub enum CollisionNormal {
    Fixed(DVector<f64>),
    UniformRandom,
}

/// Exchange of the momentum component along `n` between two sub-vectors
/// `y = x[idx_y]` and `z = x[idx_z]`; preserves `|x|^2`.
#[derive(Debug, Clone)]
pub struct CollisionJumpSpec {
    idx_y: Vec<usize>,
    idx_z: Vec<usize>,
    normal: CollisionNormal,
}

impl CollisionJumpSpec {
    pub fn new(idx_y: Vec<usize>, idx_z: Vec<usize>, normal: CollisionNormal) -> Result<Self> {
        let d = idx_y.len();
        if d == 0 || idx_z.len() != d {
            return Err(Error::Invalid(
                "collision index sets must be non-empty and of equal size".into(),
            ));
        }
        let mut all: Vec<usize> = idx_y.iter().chain(&idx_z).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("collision index sets overlap".into()));
        }
        if let CollisionNormal::Fixed(n) = &normal {
            check_dim("collision normal", d, n.len())?;
            if (n.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!(
                    "collision normal has norm {}, expected 1",
                    n.norm()
                )));
            }
        }
        Ok(Self {
            idx_y,
            idx_z,
            normal,
        })
    }

    pub fn apply<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<DVector<f64>> {
        let max = *self.idx_y.iter().chain(&self.idx_z).max().unwrap_or(&0);
        if max >= x.len() {
            return Err(Error::Invalid(format!(
                "collision index {max} out of range for state dimension {}",
                x.len()
            )));
        }
        let d = self.idx_y.len();
        let n = match &self.normal {
            CollisionNormal::Fixed(n) => n.clone(),
            CollisionNormal::UniformRandom => loop {
                let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm > 1e-12 {
                    break v / norm;
                }
            },
        };
        let proj: f64 = (0..d)
            .map(|i| (x[self.idx_z[i]] - x[self.idx_y[i]]) * n[i])
            .sum();
        let mut out = DVector::from_column_slice(x);
        for i in 0..d {
            out[self.idx_y[i]] += proj * n[i];
            out[self.idx_z[i]] -= proj * n[i];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn apply_examples() {
        let m = AffineJumpMap::shift(v(&[1.0])).unwrap();
        assert_eq!(m.apply(&[5.0], &[]).unwrap()[0], 6.0);

        let m = AffineJumpMap::deterministic(v(&[0.0]), DMatrix::identity(1, 1)).unwrap();
        assert_eq!(m.apply(&[2.0], &[]).unwrap()[0], 4.0);

        let m = AffineJumpMap::new(
            v(&[1.0, 0.0]),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(m.apply(&[0.0, 0.0], &[2.0, 3.0]).unwrap(), v(&[3.0, 3.0]));
    }

    #[test]
    fn invert_examples() {
        let m = AffineJumpMap::shift(v(&[1.0])).unwrap();
        let (xh, jac) = m.invert(&[4.0], &[]).unwrap();
        assert_eq!((xh[0], jac), (3.0, 1.0));

        let m = AffineJumpMap::deterministic(v(&[1.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let (xh, jac) = m.invert(&[5.0], &[]).unwrap();
        assert_eq!((xh[0], jac), (2.0, 0.5));

        let err = AffineJumpMap::deterministic(v(&[0.0]), DMatrix::from_element(1, 1, -1.0));
        assert!(matches!(err, Err(Error::NonInvertibleJump { .. })));
    }

    #[test]
    fn dimension_errors() {
        let m = AffineJumpMap::shift(v(&[1.0, 2.0])).unwrap();
        assert!(matches!(m.apply(&[1.0], &[]), Err(Error::Dimension { .. })));
        assert!(matches!(
            m.apply(&[1.0, 1.0], &[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn collision_full_exchange_and_orthogonal_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c =
            CollisionJumpSpec::new(vec![0], vec![1], CollisionNormal::Fixed(v(&[1.0]))).unwrap();
        assert_eq!(c.apply(&[1.0, 3.0], &mut rng).unwrap(), v(&[3.0, 1.0]));

        // z - y = (1, 0), n = (0, 1)
        let c = CollisionJumpSpec::new(
            vec![0, 1],
            vec![2, 3],
            CollisionNormal::Fixed(v(&[0.0, 1.0])),
        )
        .unwrap();
        let x = [1.0, 2.0, 2.0, 2.0];
        assert_eq!(c.apply(&x, &mut rng).unwrap(), v(&x));
    }

    #[test]
    fn collision_validation() {
        assert!(
            CollisionJumpSpec::new(vec![0, 1], vec![1, 2], CollisionNormal::UniformRandom).is_err()
        );
        assert!(
            CollisionJumpSpec::new(vec![0], vec![1], CollisionNormal::Fixed(v(&[0.9]))).is_err()
        );
    }

    #[test]
    fn discrete_law_validation() {
        assert!(JumpLaw::discrete(vec![v(&[1.0]), v(&[1.0])], vec![0.5, 0.5]).is_err());
        assert!(JumpLaw::discrete(vec![v(&[1.0]), v(&[2.0])], vec![0.5, 0.4]).is_err());
        let law = JumpLaw::discrete(vec![v(&[1.0]), v(&[-1.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(law.mean()[0], 0.0);
    }

    fn map_strategy() -> impl Strategy<Value = (AffineJumpMap, Vec<f64>, Vec<f64>)> {
        (1usize..5, 0usize..4).prop_flat_map(|(k, d)| {
            (
                prop::collection::vec(-3.0..3.0f64, k),
                prop::collection::vec(-0.4..0.4f64, k * k),
                prop::collection::vec(-2.0..2.0f64, k * d),
                prop::collection::vec(-5.0..5.0f64, k),
                prop::collection::vec(-5.0..5.0f64, d),
            )
                .prop_map(move |(h, hm, hs, x, z)| {
                    let map = AffineJumpMap::new(
                        DVector::from_vec(h),
                        DMatrix::from_row_slice(k, k, &hm),
                        DMatrix::from_row_slice(k, d, &hs),
                    )
                    .unwrap();
                    (map, x, z)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn invert_then_apply_round_trips((map, x, z) in map_strategy()) {
            let (xh, jac) = map.invert(&x, &z).unwrap();
            let back = map.apply(xh.as_slice(), &z).unwrap();
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
            let det = (DMatrix::identity(map.dim(), map.dim()) + map.h_mat()).determinant().abs();
            prop_assert!((jac * det - 1.0).abs() < 1e-12);
        }

        #[test]
        fn collision_preserves_energy(x in prop::collection::vec(-10.0..10.0f64, 6), seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = CollisionJumpSpec::new(vec![0, 2, 4], vec![1, 3, 5], CollisionNormal::UniformRandom).unwrap();
            let y = c.apply(&x, &mut rng).unwrap();
            let e0: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((y.norm_squared() - e0).abs() <= 1e-12 * e0.max(1e-300));
        }
    }
}
