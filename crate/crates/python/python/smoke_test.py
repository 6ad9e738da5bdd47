"""Smoke test for the jumpfdt Python module.

Build and install first, e.g. ``maturin develop --release`` (or
``pip install .``) from ``crates/python``; then run ``python python/smoke_test.py``.
"""

import math

import jumpfdt


def main() -> None:
    ou = jumpfdt.OuParams.scalar(2.0, 2.0)
    assert abs(ou.cov[0][0] - 1.0) < 1e-12

    jump = jumpfdt.JumpMap([1.0])
    lags = [0.0, 0.25, 0.5, 1.0]
    exact = ou.mean_response_det(jump, lags)
    for lag, value in zip(exact.lags, exact.values):
        assert abs(value[0] - math.exp(-2.0 * lag)) < 1e-12

    traj = jumpfdt.simulate(jumpfdt.Model.ou(ou), [0.0], 0.01, 200_000, seed=1, scheme="exact")
    assert len(traj) == 200_001 and traj.dim == 1

    p0 = jumpfdt.Density.gaussian([0.0], [[1.0]])
    est = jumpfdt.det_jump_response(traj, p0, jump, lags)
    for lag, value, se in zip(est.lags, est.values, est.stderr):
        z = abs(value[0] - math.exp(-2.0 * lag)) / se[0]
        assert z < 4.0, (lag, value, se)

    tcorr = jumpfdt.estimate_tcorr(traj)
    assert abs(tcorr - 0.5) < 0.1, tcorr

    mc = jumpfdt.mc_det_jump_response(
        jumpfdt.Model.ou(ou), jump, members=500, dt=0.01, horizon=1.0, seed=2, record_every=25, scheme="exact"
    )
    assert len(mc) == 5

    try:
        jumpfdt.det_jump_response(traj, p0, jump, [1e9])
    except ValueError as e:
        assert "lag" in str(e)
    else:
        raise AssertionError("lag beyond the trajectory should raise")

    print(f"ok: T_corr = {tcorr:.3f}, response(0) = {est.values[0][0]:.3f}")


if __name__ == "__main__":
    main()
