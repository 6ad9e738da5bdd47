mod common;

use common::*;
use jumpfdt::model::{
    estimate_moments, AffineJumpMap, CollisionJumpSpec, CollisionNormal, Density, GaussianDensity,
    GaussianMixture, Trajectory,
};
use jumpfdt::sde::stream_rng;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_then_apply_is_identity(seed in any::<u64>(), k in 1usize..=6, d in 0usize..=3) {
        let mut rng = stream_rng(seed, 0);
        let map = AffineJumpMap::new(
            normal_vector(k, 1.0, &mut rng),
            normal_matrix(k, k, &mut rng) * (0.4 / k as f64),
            normal_matrix(k, d, &mut rng),
        ).unwrap();
        for _ in 0..16 {
            let x = normal_vector(k, 2.0, &mut rng);
            let z = normal_vector(d, 1.0, &mut rng);
            let (xhat, jac) = map.invert(x.as_slice(), z.as_slice()).unwrap();
            let back = map.apply(xhat.as_slice(), z.as_slice()).unwrap();
            prop_assert!(rel_norm(back.as_slice(), x.as_slice()) < 1e-10);
            let det = (DMatrix::identity(k, k) + map.h_mat()).determinant().abs();
            prop_assert!((jac * det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_preserves_energy(seed in any::<u64>(), k in 2usize..=8, fixed in any::<bool>()) {
        let mut rng = stream_rng(seed, 0);
        let d = 1 + (seed as usize) % (k / 2);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.shuffle(&mut rng);
        let normal = if fixed {
            let n = normal_vector(d, 1.0, &mut rng);
            CollisionNormal::Fixed(&n / n.norm())
        } else {
            CollisionNormal::UniformRandom
        };
        let spec = CollisionJumpSpec::new(idx[..d].to_vec(), idx[d..2 * d].to_vec(), normal).unwrap();
        for _ in 0..16 {
            let x = normal_vector(k, 3.0, &mut rng);
            let y = spec.apply(x.as_slice(), &mut rng).unwrap();
            prop_assert!(((y.norm_squared() - x.norm_squared()) / x.norm_squared()).abs() < 1e-12);
            for &i in &idx[2 * d..] {
                prop_assert_eq!(y[i], x[i]);
            }
        }
    }

    #[test]
    fn mixture_density_is_nonnegative(seed in any::<u64>(), k in 1usize..=4, n in 1usize..=4) {
        let mut rng = stream_rng(seed, 0);
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let total: f64 = raw.iter().sum();
        let mix = GaussianMixture::new(
            raw.iter().map(|w| w / total).collect(),
            (0..n).map(|_| random_gaussian(k, &mut rng)).collect(),
        ).unwrap();
        prop_assert!((mix.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p0: Density = mix.into();
        for _ in 0..16 {
            let x = normal_vector(k, 5.0, &mut rng);
            prop_assert!(p0.eval(x.as_slice()).unwrap() >= 0.0);
        }
    }

    #[test]
    fn single_component_mixture_is_exact(seed in any::<u64>(), k in 1usize..=4) {
        let mut rng = stream_rng(seed, 0);
        let g = random_gaussian(k, &mut rng);
        let mix = GaussianMixture::single(g.clone());
        for _ in 0..8 {
            let x = normal_vector(k, 2.0, &mut rng);
            prop_assert_eq!(mix.pdf(x.as_slice()), g.pdf(x.as_slice()));
        }
    }
}

#[test]
fn collision_random_unit_normal_example() {
    let mut rng = stream_rng(4, 0);
    let spec = CollisionJumpSpec::new(vec![0, 2, 4], vec![1, 3, 5], CollisionNormal::UniformRandom)
        .unwrap();
    for _ in 0..1000 {
        let x = normal_vector(6, 1.0, &mut rng);
        let y = spec.apply(x.as_slice(), &mut rng).unwrap();
        assert!(((y.norm_squared() - x.norm_squared()) / x.norm_squared()).abs() < 1e-12);
    }
}

#[test]
fn gaussian_density_examples() {
    let g = GaussianDensity::standard(1).unwrap();
    assert!((g.pdf(&[0.0]) - 0.398_942_3).abs() < 1e-7);
    let c = |m: f64| GaussianDensity::univariate(m, 1.0).unwrap();
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![c(-1.0), c(1.0)]).unwrap();
    assert!((mix.pdf(&[0.0]) - 0.241_970_7).abs() < 1e-7);
    assert!((mix.pdf(&[0.0]) - g.pdf(&[1.0])).abs() < 1e-15);
}

#[test]
fn moment_examples() {
    let m = estimate_moments(&Trajectory::new(0.1, 1, vec![0.0, 2.0]).unwrap());
    assert_eq!(m.mean[0], 1.0);
    assert_eq!(m.cov[(0, 0)], 2.0);
}
