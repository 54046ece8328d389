import numpy as np
import pytest
from scipy import integrate

from locstat import models
from locstat import stationary as st
from locstat.dynamics import Lipschitz, ModelSpec
from locstat.noise import BROWNIAN, JumpSpec, LevyTriplet
from locstat.rng import stream

CPOIS = LevyTriplet(0.0, 0.0, JumpSpec(1.0, atoms=((1.0, 0.5), (-1.0, 0.5))))


def diag_spec():
    return ModelSpec(
        2,
        lambda t: np.diag([-1.0, -2.0]),
        lambda t: np.ones(2),
        lambda t: np.ones(2),
        Lipschitz(0, 0, 0),
        True,
        1.0,
        "diagAB",
    )


# --- closed-form moments -----------------------------------------------------


def test_mean_examples():
    assert st.stationary_mean(models.ou(1.0), 1.0, BROWNIAN) == 0.0
    assert st.stationary_mean(models.ou(2.0), 1.0, LevyTriplet(3.0, 1.0)) == pytest.approx(1.5)
    # componentwise integral oracle: 1/1 + 1/2
    oracle = sum(
        integrate.quad(lambda s, lam=lam: np.exp(-lam * s), 0, np.inf)[0] for lam in (1.0, 2.0)
    )
    got = st.stationary_mean(diag_spec(), 1.0, LevyTriplet(1.0, 1.0))
    assert got == pytest.approx(oracle, abs=1e-9)
    assert got == pytest.approx(1.5, abs=1e-12)


def test_autocov_examples():
    ou = models.ou(1.0)
    assert st.stationary_autocov(ou, 1.0, BROWNIAN, 0.0) == pytest.approx(0.5, abs=1e-12)
    # quadrature oracle for the lag-2 value
    oracle, _ = integrate.quad(lambda s: np.exp(-s) * np.exp(-(s + 2.0)), 0, np.inf)
    assert st.stationary_autocov(ou, 1.0, BROWNIAN, 2.0) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.5 * np.exp(-2.0), abs=1e-12)
    # exponential decay at long range
    fr = st.freeze(models.tvcar_sin(), 1.0)
    far = st.stationary_autocov(models.tvcar_sin(), 1.0, BROWNIAN, 60.0 / fr.margin)
    assert abs(far) < 1e-10 * st.stationary_autocov(models.tvcar_sin(), 1.0, BROWNIAN, 0.0)
    with pytest.raises(ValueError):
        st.stationary_autocov(ou, 1.0, BROWNIAN, -1.0)


def test_unstable_system_rejected():
    growing = models.ou(1.0)
    object.__setattr__(growing, "a", lambda t: -0.5 + 0.0 * np.asarray(t))
    with pytest.raises(ValueError):
        st.freeze(growing, 1.0)


def test_lyapunov_residual_all_shipped_specs():
    for name, spec in models.shipped_specs().items():
        if name == "tvcar_step":
            continue
        fr = st.freeze(spec, 1.0)
        gam = st.lyapunov_gram(fr)
        cct = np.outer(fr.C, fr.C)
        residual = np.linalg.norm(fr.A @ gam + gam @ fr.A.T + cct)
        assert residual <= 1e-10 * np.linalg.norm(cct), name


def test_variance_matches_quadrature_route():
    # independent route: adaptive quadrature of f(s)^2 against the Gramian value
    for spec in (models.ou(1.0), models.tvcar_sin(), diag_spec(), models.companion2()):
        fr = st.freeze(spec, 1.0)
        _, i2, _, _ = st.kernel_power_integrals(fr)
        var = st.stationary_autocov(spec, 1.0, BROWNIAN, 0.0)
        assert var == pytest.approx(i2, rel=1e-10)


def test_kernel_power_integrals_ou_closed_forms():
    fr = st.freeze(models.ou(1.0), 1.0)
    i1, i2, i3, i4 = st.kernel_power_integrals(fr)
    assert i1 == pytest.approx(1.0, rel=1e-10)
    assert i2 == pytest.approx(0.5, rel=1e-10)
    assert i3 == pytest.approx(1.0 / 3.0, rel=1e-10)
    assert i4 == pytest.approx(0.25, rel=1e-10)


def test_fourth_moment_examples():
    ou = models.ou(1.0)
    assert st.fourth_moment_integral(ou, 1.0, BROWNIAN) == pytest.approx(0.75, rel=1e-9)
    assert st.fourth_moment_integral(ou, 1.0, CPOIS) == pytest.approx(1.0, rel=1e-9)
    # drift-only driver: Y is the constant c / a
    drift_only = LevyTriplet(3.0, 0.0)
    assert st.fourth_moment_integral(models.ou(2.0), 1.0, drift_only) == pytest.approx(
        (3.0 / 2.0) ** 4, rel=1e-9
    )


def test_fourth_moment_jensen():
    for tri in (BROWNIAN, CPOIS, LevyTriplet(0.5, 1.0, JumpSpec(2.0, atoms=((0.5, 1.0),)))):
        second = st.second_moment(models.tvcar_sin(), 1.0, tri)
        fourth = st.fourth_moment_integral(models.tvcar_sin(), 1.0, tri)
        assert fourth >= second**2 - 1e-12


def test_fourth_moment_vs_exact_simulation():
    # Monte Carlo oracle on exactly placed jumps
    gen = stream(5, "fourth-mc", 0)
    fr = st.freeze(models.ou(1.0), 1.0)
    vals = st.simulate_stationary_batch(fr, CPOIS, np.full(2 * 10**5, 3.0), 1, [gen])[0]
    m4 = np.mean(vals**4)
    se = np.std(vals**4) / np.sqrt(len(vals))
    assert abs(m4 - 1.0) < 3 * se


# --- limit variances ----------------------------------------------------------


def test_sigma2_o1_geometric_series():
    ou = models.ou(1.0)
    res = st.sigma2(ou, 1.0, BROWNIAN, ("O1", 1.0))
    # geometric closed form: 1/4 + sum_k r(k) = 1/4 + (1/2) e^{-1} / (1 - e^{-1})
    closed = 0.25 + 0.5 * np.exp(-1.0) / (1.0 - np.exp(-1.0))
    # partial-sum oracle
    partial = 0.25 + sum(0.5 * np.exp(-k) for k in range(1, 200))
    assert closed == pytest.approx(partial, abs=1e-15)
    assert res.value == pytest.approx(closed, abs=1e-11)
    assert res.positive


def test_sigma2_o2_half_second_moment():
    res = st.sigma2(models.ou(1.0), 1.0, BROWNIAN, "O2")
    assert res.value == 0.25
    assert res.candidates == {"half_second_moment": 0.25, "second_moment": 0.5}


def test_sigma2_o1_large_delta_approaches_o2():
    res = st.sigma2(models.ou(1.0), 1.0, BROWNIAN, ("O1", 50.0))
    assert res.value == pytest.approx(0.25, abs=1e-10)


def test_sigma2_requires_centered_driver():
    with pytest.raises(ValueError, match="center"):
        st.sigma2(models.ou(1.0), 1.0, LevyTriplet(1.0, 1.0), "O2")


def test_sigma2_tilde_examples():
    ou = models.ou(1.0)
    # k = 0 under widening spacing: (1/2) Var(Y^2) = (1/2)(0.75 - 0.25)
    r0 = st.sigma2_tilde(ou, 1.0, BROWNIAN, 0.0, "O2")
    assert r0.closed_form
    assert r0.value == pytest.approx(0.25, abs=1e-12)
    # distant lag: (1/2) r(0)^2
    rk = st.sigma2_tilde(ou, 1.0, BROWNIAN, 40.0, "O2")
    assert rk.value == pytest.approx(0.125, abs=1e-10)
    # deterministic (zero) driver: constant process
    zero = st.sigma2_tilde(ou, 1.0, LevyTriplet(0.0, 0.0), 1.0, "O2")
    assert zero.value == 0.0


def test_sigma2_tilde_o1_isserlis_series():
    # oracle: 1/2 (r0^2 + r1^2) + sum_h [r(h)^2 + r(h+1) r(|h-1|)] for r(h) = e^{-h}/2
    r = lambda h: 0.5 * np.exp(-abs(h))
    oracle = 0.5 * (r(0) ** 2 + r(1) ** 2) + sum(
        r(h) ** 2 + r(h + 1) * r(h - 1) for h in range(1, 300)
    )
    res = st.sigma2_tilde(models.ou(1.0), 1.0, BROWNIAN, 1.0, ("O1", 1.0))
    assert res.closed_form
    assert res.value == pytest.approx(oracle, abs=1e-11)


def test_sigma2_tilde_monte_carlo_branch():
    res = st.sigma2_tilde(
        models.ou(1.0), 1.0, CPOIS, 0.0, "O2", rng=stream(3, "tilde-mc", 0), replications=120
    )
    assert not res.closed_form
    assert res.std_error is not None
    # truth: (1/2)(E[Y^4] - r0^2) = (1/2)(1.0 - 0.25)
    assert abs(res.value - 0.375) < 4 * res.std_error


def test_covariance_decay_check():
    rep = st.covariance_decay_check(models.ou(1.0), 1.0, BROWNIAN, eps=0.5)
    assert rep.passed
    assert rep.fitted_rate == pytest.approx(1.0, abs=1e-3)
    rep2 = st.covariance_decay_check(models.tvcar_sin(), 1.0, BROWNIAN, eps=1.0)
    assert rep2.passed


# --- exact simulation ----------------------------------------------------------


def test_zero_driver_simulates_to_zero():
    path = st.simulate_stationary(
        models.ou(1.0), 1.0, LevyTriplet(0.0, 0.0), np.arange(10.0), stream(0, "zero", 0)
    )
    assert np.all(path.values == 0.0)


def test_ou_lag_one_autocorrelation():
    gen = stream(1, "acf", 0)
    path = st.simulate_stationary(models.ou(1.0), 1.0, BROWNIAN, np.arange(10**5) * 1.0, gen)
    v = path.values
    corr = np.corrcoef(v[:-1], v[1:])[0, 1]
    se = np.sqrt((1 - np.exp(-2.0)) / len(v))
    assert abs(corr - np.exp(-1.0)) < 4 * se


def test_ou_variance_and_mean():
    gen = stream(2, "varm", 0)
    path = st.simulate_stationary(models.ou(1.0), 1.0, BROWNIAN, np.arange(10**5) * 1.0, gen)
    v = path.values
    assert abs(v.mean()) < 4 * v.std() / np.sqrt(len(v) / 2)
    se_var = np.std(v**2) / np.sqrt(len(v) / 2)
    assert abs(v.var() - 0.5) < 4 * se_var


def test_moment_simulation_consistency_shipped_specs():
    # empirical mean, variance, lag autocovariances and fourth moment against
    # the closed forms, within 4 Monte Carlo standard errors
    cases = [
        (models.ou(1.0), LevyTriplet(0.5, 1.0), 1.0),
        (models.tvcar_sin(), CPOIS, 1.0),
        (diag_spec(), LevyTriplet(0.0, 1.0, JumpSpec(0.5, atoms=((1.0, 1.0),))), 1.0),
    ]
    for spec, tri, u in cases:
        fr = st.freeze(spec, u)
        n = 60_000
        spacing = 2.0 / fr.margin
        vals = st.simulate_stationary_batch(
            fr, tri, np.full(n, spacing), 1, [stream(4, f"cons:{spec.model_id}", 0)]
        )[0]
        mean = st.stationary_mean(spec, u, tri)
        var = float(st.stationary_autocov(spec, u, tri, 0.0))
        fourth = st.fourth_moment_integral(spec, u, tri)
        assert abs(vals.mean() - mean) < 4 * vals.std() / np.sqrt(n / 3), spec.model_id
        c = vals - vals.mean()
        assert abs(c.var() - var) < 4 * np.std(c**2) / np.sqrt(n / 3), spec.model_id
        assert abs(np.mean(vals**4) - fourth) < 4 * np.std(vals**4) / np.sqrt(n / 3), spec.model_id
        for lag_steps, lag in ((1, spacing),):
            emp = np.mean(c[:-lag_steps] * c[lag_steps:])
            target = float(st.stationary_autocov(spec, u, tri, lag))
            se = np.std(c[:-lag_steps] * c[lag_steps:]) / np.sqrt(n / 3)
            assert abs(emp - target) < 4 * se, spec.model_id


def test_isserlis_cross_check_gaussian():
    # Monte Carlo E[Y0 Yk Yh Yh+k] against the covariance expansion
    ou = models.ou(1.0)
    fr = st.freeze(ou, 1.0)
    n = 2 * 10**5
    vals = st.simulate_stationary_batch(fr, BROWNIAN, np.full(n, 1.0), 1, [stream(6, "iss", 0)])[0]
    m = len(vals)
    r = lambda h: float(st.stationary_autocov(ou, 1.0, BROWNIAN, float(abs(h))))
    for k in (0, 1):
        for h in (1, 2):
            prod = vals[: m - h - k] * vals[k : m - h] * vals[h : m - k] * vals[h + k :]
            closed = r(k) ** 2 + r(h) ** 2 + r(h + k) * r(h - k)
            se = np.std(prod) / np.sqrt(len(prod) / 4)
            assert abs(np.mean(prod) - closed) < 4 * se, (k, h)


def test_gaussian_step_covariance_matches_quadrature():
    # block-exponential identity vs direct quadrature, nondiagonal system
    fr = st.freeze(models.companion2(), 0.0)
    h = 0.7
    from locstat.stationary import _gaussian_conv_cov
    from scipy.linalg import expm

    got = _gaussian_conv_cov(fr.A, np.outer(fr.C, fr.C), h)
    oracle = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            oracle[i, j], _ = integrate.quad(
                lambda s, i=i, j=j: (expm(fr.A * s) @ fr.C)[i] * (expm(fr.A * s) @ fr.C)[j],
                0.0,
                h,
                limit=200,
                epsabs=1e-13,
            )
    assert np.abs(got - oracle).max() < 1e-10


def test_defective_state_matrix_uses_expm_fallback():
    # Jordan block with a repeated eigenvalue: the eigenvector basis is
    # unusable, so moments and jump placement must go through expm
    from scipy.linalg import expm

    spec = ModelSpec(
        2,
        lambda t: np.array([[-1.0, 1.0], [0.0, -1.0]]),
        lambda t: np.array([1.0, 0.5]),
        lambda t: np.array([0.0, 1.0]),
        Lipschitz(0, 0, 0),
        True,
        1.0,
        "jordan",
    )
    fr = st.freeze(spec, 0.0)
    B, C = np.array([1.0, 0.5]), np.array([0.0, 1.0])
    var = float(st.stationary_autocov(spec, 0.0, BROWNIAN, 0.0))
    oracle, _ = integrate.quad(lambda s: (B @ expm(fr.A * s) @ C) ** 2, 0, 60, limit=300)
    assert var == pytest.approx(oracle, rel=1e-10)
    tri = LevyTriplet(0.0, 0.5, JumpSpec(1.0, atoms=((1.0, 0.5), (-1.0, 0.5))))
    vals = st.simulate_stationary_batch(fr, tri, np.full(30_000, 2.0), 1,
                                        [stream(11, "jordan", 0)])[0]
    target = float(st.stationary_autocov(spec, 0.0, tri, 0.0))
    se = np.std(vals**2) / np.sqrt(len(vals) / 2)
    assert abs(vals.var() - target) < 4 * se


def test_lipschitz_in_u_bounded_ratio():
    # coupled frozen pairs: L2 distance scales at most linearly in |u - v|
    from locstat.experiments import _joint_frozen

    spec = models.tvcar_sin()
    ratios = []
    for eps in (0.01, 0.05, 0.1, 0.25, 0.5):
        fr = _joint_frozen(spec, BROWNIAN, 1.0 - eps / 2, 1.0 + eps / 2)
        d = np.sqrt(st.second_moment(fr, 0.0, BROWNIAN))
        ratios.append(d / eps)
    ratios = np.asarray(ratios)
    assert np.all(ratios < 2.0 * ratios.min())


def test_stationary_moments_bundle():
    mom = st.stationary_moments(models.ou(1.0), 1.0, BROWNIAN)
    assert mom.mean == 0.0
    assert mom.variance == pytest.approx(0.5)
    assert mom.second_moment == pytest.approx(0.5)
    assert mom.fourth_moment == pytest.approx(0.75, rel=1e-9)
    assert mom.autocov(1.0) == pytest.approx(0.5 * np.exp(-1), abs=1e-12)
    assert mom.sigma2_O2 == 0.25
    assert mom.sigma2_O1(1.0) == pytest.approx(0.25 + 0.5 / (np.e - 1), abs=1e-10)
    assert mom.sigma2_tilde_O2(0) == pytest.approx(0.25, abs=1e-12)
    # non-centered driver: limit variances undefined
    mom2 = st.stationary_moments(models.ou(1.0), 1.0, LevyTriplet(1.0, 1.0))
    assert mom2.sigma2_O2 is None and mom2.mean == pytest.approx(1.0)
