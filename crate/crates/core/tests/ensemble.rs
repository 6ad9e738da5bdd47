mod common;

use common::*;
use jumpfdt::ensemble::{
    mc_det_jump_response, mc_random_jump_response, mc_random_time_response,
    stationary_initial_states, EnsembleConfig,
};
use jumpfdt::estimators::{ResponseCurve, TestFunction};
use jumpfdt::model::{AffineJumpMap, GaussianDensity, IntensityModel, JumpLaw};
use jumpfdt::oracle::{ou_mean_response_det, ou_mean_response_random, OuParams};
use jumpfdt::sde::{ModelSpec, Scheme};
use nalgebra::DMatrix;

fn scalar_ou(l: f64, g: f64) -> (OuParams, ModelSpec) {
    let ou = OuParams::scalar(l, g).unwrap();
    (ou.clone(), ModelSpec::Ou(ou))
}

fn config(members: usize, horizon: f64, seed: u64, common_noise: bool) -> EnsembleConfig {
    let mut cfg = EnsembleConfig::new(members, 0.01, horizon, seed).unwrap();
    cfg.common_noise = common_noise;
    cfg.record_every = 25;
    cfg.scheme = Scheme::ExactOu;
    cfg
}

/// Every point within 3 SE of the reference (SE-free points must match to 1e-12).
fn assert_within(est: &ResponseCurve, reference: &ResponseCurve) {
    for (i, (v, s)) in est.values.iter().zip(&est.stderr).enumerate() {
        for c in 0..v.len() {
            let d = (v[c] - reference.values[i][c]).abs();
            assert!(
                d <= 3.0 * s[c] + 1e-12,
                "t = {}: {} vs {} (se {})",
                est.lags[i],
                v[c],
                reference.values[i][c],
                s[c]
            );
        }
    }
}

fn zero_curve(est: &ResponseCurve) -> ResponseCurve {
    ResponseCurve::exact(est.lags.clone(), vec![vec![0.0; est.width()]; est.len()]).unwrap()
}

#[test]
fn curves_do_not_depend_on_the_thread_count() {
    let model = ModelSpec::double_well(0.7).unwrap();
    let map = AffineJumpMap::new(v(&[0.5]), m1(0.0), m1(1.0)).unwrap();
    let law = JumpLaw::Gaussian(GaussianDensity::univariate(0.0, 0.1).unwrap());
    let intensity = IntensityModel::homogeneous(1.0).unwrap();
    let mut cfg = EnsembleConfig::new(300, 0.01, 1.0, 5).unwrap();
    cfg.record_every = 10;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            (
                mc_det_jump_response(
                    &model,
                    &map.fold_z(&[0.1]).unwrap(),
                    TestFunction::Energy,
                    &cfg,
                )
                .unwrap(),
                mc_random_time_response(
                    &model,
                    &map,
                    &law,
                    &intensity,
                    TestFunction::Identity,
                    &cfg,
                )
                .unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn common_noise_shrinks_the_error() {
    let (_, model) = scalar_ou(2.0, 2.0);
    let map = AffineJumpMap::shift(v(&[1.0])).unwrap();
    let mut shared = config(10_000, 1.0, 6, true);
    shared.scheme = Scheme::EulerMaruyama;
    let independent = EnsembleConfig {
        common_noise: false,
        ..shared.clone()
    };
    let a = mc_det_jump_response(&model, &map, TestFunction::Identity, &shared).unwrap();
    let b = mc_det_jump_response(&model, &map, TestFunction::Identity, &independent).unwrap();
    for i in 1..a.len() {
        assert!(b.stderr[i][0] >= 5.0 * a.stderr[i][0], "t = {}", a.lags[i]);
    }
}

#[test]
fn deterministic_jump_on_ou_decays_exponentially() {
    let (ou, model) = scalar_ou(2.0, 2.0);
    let map = AffineJumpMap::shift(v(&[1.0])).unwrap();
    for common in [true, false] {
        let cfg = config(10_000, 2.0, 7, common);
        let est = mc_det_jump_response(&model, &map, TestFunction::Identity, &cfg).unwrap();
        assert_within(&est, &ou_mean_response_det(&ou, &map, &est.lags).unwrap());
    }
}

#[test]
fn random_jump_on_ou_follows_the_mean_kick() {
    let ou = OuParams::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 2.0]),
        DMatrix::identity(2, 2),
    )
    .unwrap();
    let model = ModelSpec::Ou(ou.clone());
    let map = AffineJumpMap::new(
        v(&[0.3, -0.2]),
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
    )
    .unwrap();
    let law = JumpLaw::Gaussian(
        GaussianDensity::new(v(&[0.5, 0.2]), DMatrix::identity(2, 2) * 0.3).unwrap(),
    );
    let cfg = config(10_000, 2.0, 8, true);
    let est = mc_random_jump_response(&model, &map, &law, TestFunction::Identity, &cfg).unwrap();
    assert_within(
        &est,
        &ou_mean_response_random(&ou, &map, &law, &est.lags).unwrap(),
    );
}

#[test]
fn one_atom_law_reproduces_the_deterministic_ensemble() {
    let model = ModelSpec::double_well(0.7).unwrap();
    let map = AffineJumpMap::new(v(&[0.2]), m1(0.1), m1(1.0)).unwrap();
    let mut cfg = EnsembleConfig::new(200, 0.01, 1.0, 9).unwrap();
    cfg.record_every = 10;
    let a = mc_random_jump_response(
        &model,
        &map,
        &JumpLaw::point(v(&[0.3])),
        TestFunction::Identity,
        &cfg,
    )
    .unwrap();
    let b = mc_det_jump_response(
        &model,
        &map.fold_z(&[0.3]).unwrap(),
        TestFunction::Identity,
        &cfg,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn null_perturbations_give_zero() {
    let (_, ou) = scalar_ou(1.0, 2f64.sqrt());
    let dw = ModelSpec::double_well(0.7).unwrap();
    let kick = AffineJumpMap::new(v(&[0.0]), m1(0.0), m1(1.0)).unwrap();
    let centred = JumpLaw::Gaussian(GaussianDensity::univariate(0.0, 0.5).unwrap());
    let tiny = IntensityModel::homogeneous(1e-12).unwrap();
    let identity = AffineJumpMap::shift(v(&[0.0])).unwrap();
    let busy = IntensityModel::homogeneous(2.0).unwrap();
    for model in [&ou, &dw] {
        let mut cfg = config(2000, 2.0, 10, true);
        if !matches!(model, ModelSpec::Ou(_)) {
            cfg.scheme = Scheme::EulerMaruyama;
        }
        let curves = [
            mc_random_jump_response(model, &kick, &centred, TestFunction::Identity, &cfg).unwrap(),
            mc_random_time_response(model, &kick, &centred, &tiny, TestFunction::Identity, &cfg)
                .unwrap(),
            mc_random_time_response(
                model,
                &identity,
                &JumpLaw::none(),
                &busy,
                TestFunction::Energy,
                &cfg,
            )
            .unwrap(),
        ];
        // only the OU random kick has a linear, model-independent zero mean
        let checked = if matches!(model, ModelSpec::Ou(_)) {
            &curves[..]
        } else {
            &curves[1..]
        };
        for c in checked {
            assert_within(c, &zero_curve(c));
        }
    }
}

#[test]
fn double_well_initial_states_are_symmetric() {
    let model = ModelSpec::double_well(0.7).unwrap();
    let xs: Vec<f64> = stationary_initial_states(&model, 2000, 11, 0.01)
        .unwrap()
        .iter()
        .map(|x| x[0])
        .collect();
    let (m, se) = mean_se(&xs);
    assert!(m.abs() < 3.0 * se, "mean {m} se {se}");
}
