"""Monte Carlo campaigns verifying the limit behavior at desk scale.

Four experiment families:

  coupling      rate of the frozen-coefficient approximation: the rescaled
                process and its stationary approximation are simulated on the
                same noise and the L2 distance is fitted against N (slope -1)
  lln           localized discrete statistics (fixed or widening spacing) and
                the continuous-observation averages, RMSE against the frozen
                closed forms across an N ladder
  clt           distribution of the scaled localized statistic at the largest
                N against every candidate limit variance
  lipschitz_u   smoothness of the frozen family in the localization point,
                fitted on coupled simulations over a |u - v| ladder

Replications are deterministic: each replication draws from its own
counter-based stream keyed by (seed, purpose, replication index), work is cut
into fixed-size chunks, and reduction is in chunk order, so reports are
bit-identical for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing

import numpy as np
from scipy import linalg, stats

from . import stationary as stat
from .dynamics import (
    Car1Spec,
    ModelSpec,
    _draw_increments_rows,
    build_scalar_plan_rescaled,
    run_scalar_plan,
    validate_car1,
    validate_model,
)
from .kernels import LocalizingKernel, rectangular
from .noise import LevyTriplet, triplet_moments
from .observation import BandwidthRule, clt_admissible, make_scheme
from .rng import stream

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "InadmissibleSchemeError",
    "run_coupling",
    "run_lln",
    "run_clt",
    "run_lipschitz_u",
    "run_experiment",
]

CHUNK = 64  # fixed chunk size; reduction order never depends on worker count


class InadmissibleSchemeError(ValueError):
    """Configuration violates a condition required by the target theorem."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str  # coupling | lln_discrete | lln_continuous | clt_mean | clt_cov | lipschitz_u
    model: object
    triplet: LevyTriplet
    u: float
    N_list: tuple
    replications: int
    seed: int
    fine_step: float
    burn_in: float
    kernel: LocalizingKernel = field(default_factory=rectangular)
    bandwidth: BandwidthRule | None = None
    step_rule: object | None = None
    lag: int = 0
    statistic: str = "mean"  # lln_discrete: mean | autocov
    t_end: float = 1.0  # lln_continuous
    n_quad: int = 4096  # lln_continuous trapezoid intervals
    ladder: tuple = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)  # lipschitz_u
    p_norm: int = 2  # lipschitz_u
    time_points: int = 48  # lipschitz_u samples per path
    workers: int = 1
    validate_inputs: bool = True
    rmse_tol: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        if any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ValueError("N_list must be strictly increasing")
        if self.kind in ("lln_discrete", "lln_continuous") and self.replications < 100:
            raise ValueError("lln experiments need at least 100 replications")
        if self.kind in ("clt_mean", "clt_cov") and self.replications < 1000:
            raise ValueError("clt experiments need at least 1000 replications")
        if self.kind == "lipschitz_u" and self.p_norm not in (2, 4):
            raise ValueError("p_norm must be 2 or 4")


@dataclass
class ExperimentReport:
    kind: str
    passed: bool
    rows: list
    summary: dict
    replication_values: np.ndarray | None = None  # raw statistics, CSV emission only

    def to_dict(self) -> dict:
        return _py(
            {"kind": self.kind, "passed": self.passed, "rows": self.rows, "summary": self.summary}
        )


def _py(obj):
    """Recursively convert numpy scalars/arrays for JSON emission."""
    if isinstance(obj, dict):
        return {k: _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_py(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _call_chunk(args):
    fn, payload, lo, hi = args
    return fn(payload, lo, hi)


def _map_chunks(fn, payload, n_reps: int, workers: int) -> np.ndarray:
    chunks = [(lo, min(lo + CHUNK, n_reps)) for lo in range(0, n_reps, CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        parts = [fn(payload, lo, hi) for lo, hi in chunks]
    else:
        method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
        ctx = multiprocessing.get_context(method)
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_call_chunk, [(fn, payload, lo, hi) for lo, hi in chunks]))
    return np.concatenate(parts, axis=0)


def _validate(config: ExperimentConfig) -> None:
    if not config.validate_inputs:
        return
    model = config.model
    report = validate_car1(model) if isinstance(model, Car1Spec) else validate_model(model)
    if not report.passed:
        raise ValueError(f"model fails its declared invariants: {report}")


def _as_car1(model) -> Car1Spec:
    if isinstance(model, Car1Spec):
        return model
    raise NotImplementedError("this experiment path is implemented for scalar models")


# ---------------------------------------------------------------------------
# coupling


def _coupling_weights(model, triplet, u, N, h, n_cells):
    """Forward-grid noise weights for Y_N(u) and the frozen process at u.

    Unrolling the one-step recursion writes each as a weighted sum of the
    shared increments; differencing the weight vectors gives the coupled gap.
    """
    t_eval = float(u)
    s_end = N * t_eval
    lefts = s_end - (n_cells - np.arange(n_cells)) * h
    mids = lefts + 0.5 * h
    if isinstance(model, Car1Spec):
        a_u = float(np.asarray(model.a(t_eval)))
        phi = np.exp(-np.asarray(model.a(mids / N), dtype=float) * h)
        rev = np.cumprod(phi[::-1])
        w_n = np.empty(n_cells)
        w_n[-1] = 1.0
        w_n[:-1] = rev[n_cells - 2 :: -1]
        depth = (n_cells - 1 - np.arange(n_cells)) * h
        w_frozen = np.exp(-a_u * depth)
        return w_n, w_frozen
    # general state space: backward accumulation of B' (Phi_{n-1} ... Phi_{j+1})
    spec: ModelSpec = model
    B_t = np.asarray(spec.B(t_eval), dtype=float)
    A_u = np.asarray(spec.A(t_eval), dtype=float)
    w_n = np.empty(n_cells)
    w_frozen = np.empty(n_cells)
    v = B_t.copy()
    frozen_step = linalg.expm(A_u * h)
    v_frozen = B_t.copy()
    C_u = np.asarray(spec.C(t_eval), dtype=float)
    for j in range(n_cells - 1, -1, -1):
        w_n[j] = v @ np.asarray(spec.C(lefts[j] / N), dtype=float)
        w_frozen[j] = v_frozen @ C_u
        if j > 0:
            prop = linalg.expm(np.asarray(spec.A(mids[j] / N), dtype=float) * h)
            v = v @ prop
            v_frozen = v_frozen @ frozen_step
    return w_n, w_frozen


def _coupling_chunk(payload, lo, hi):
    cfg = payload["config"]
    diffs = payload["diff_weights"]  # list over N of (n_cells,) arrays
    n_cells = diffs[0].shape[0]
    gens = [stream(cfg.seed, "coupling", i) for i in range(lo, hi)]
    inc = _draw_increments_rows(cfg.triplet, cfg.fine_step, n_cells, gens)
    return np.stack([inc @ d for d in diffs], axis=1)  # (R, len(N_list))


def run_coupling(config: ExperimentConfig) -> ExperimentReport:
    """Fit the decay of || Y_N(u) - frozen(u) ||_{L2} against N.

    Both processes are built from one shared increment array per replication
    (indexed by distance to the evaluation time), so the gap is measured on
    coupled noise. Passes when the fitted log-log slope lies in [-1.3, -0.7].
    """
    _validate(config)
    h = config.fine_step
    margin = config.model.stability_margin
    if config.burn_in < 8.0 / margin - 1e-9:
        raise ValueError(f"burn_in must be at least {8.0 / margin}")
    n_cells = int(np.ceil(config.burn_in / h - 1e-12))
    mom = triplet_moments(config.triplet)
    diffs, targets = [], []
    for N in config.N_list:
        w_n, w_f = _coupling_weights(config.model, config.triplet, config.u, N, h, n_cells)
        d = w_n - w_f
        diffs.append(d)
        exact_sq = mom.Sigma_L * h * float(d @ d) + mom.mu_L**2 * (h * float(d.sum())) ** 2
        targets.append(np.sqrt(exact_sq))
    payload = {"config": config, "diff_weights": diffs}
    D = _map_chunks(_coupling_chunk, payload, config.replications, config.workers)

    rows = []
    dists = []
    for j, N in enumerate(config.N_list):
        sq = D[:, j] ** 2
        est_sq = float(np.mean(sq))
        dist = float(np.sqrt(est_sq))
        se_sq = float(np.std(sq, ddof=1) / np.sqrt(len(sq)))
        se = se_sq / (2.0 * dist) if dist > 0 else 0.0
        ok = abs(dist - targets[j]) <= 4.0 * se + 1e-15
        rows.append(
            {"N": N, "estimate": dist, "std_error": se, "target": targets[j], "pass": bool(ok)}
        )
        dists.append(dist)
    slope, intercept = np.polyfit(np.log(config.N_list), np.log(dists), 1)
    passed = bool(-1.3 <= slope <= -0.7)
    return ExperimentReport(
        kind="coupling",
        passed=passed,
        rows=rows,
        summary={
            "slope": float(slope),
            "slope_window": [-1.3, -0.7],
            "intercept": float(intercept),
            "replications": config.replications,
        },
    )


# ---------------------------------------------------------------------------
# localized statistic simulation shared by lln / clt


def _union_offsets(scheme, lag: int):
    """Rescaled node offsets around N u for the grid and its lagged shift."""
    s = scheme.rescaled_spacing
    base = s * np.arange(-scheme.m_N, scheme.m_N + 1)
    if lag <= 0:
        offsets = base
        base_idx = np.arange(base.size)
        shift_idx = base_idx
        return offsets, base_idx, shift_idx
    shifted = base + float(lag)
    offsets = np.union1d(base, shifted)
    # collapse float near-duplicates (exact coincidence is the common case)
    keep = np.concatenate([[True], np.diff(offsets) > 1e-9 * max(s, 1.0)])
    offsets = offsets[keep]

    def nearest(wanted):
        idx = np.clip(np.searchsorted(offsets, wanted), 0, len(offsets) - 1)
        left = np.clip(idx - 1, 0, len(offsets) - 1)
        return np.where(
            np.abs(offsets[left] - wanted) < np.abs(offsets[idx] - wanted), left, idx
        )

    return offsets, nearest(base), nearest(shifted)


def _localized_chunk(payload, lo, hi):
    cfg: ExperimentConfig = payload["config"]
    N = payload["N"]
    purpose = payload["purpose"]
    scheme = make_scheme(cfg.u, N, cfg.bandwidth, cfg.step_rule)
    lag = payload["lag"]
    offsets, base_idx, shift_idx = _union_offsets(scheme, lag)
    rescaled = N * cfg.u + offsets
    model = _as_car1(cfg.model)
    plan = build_scalar_plan_rescaled(model, N, rescaled, cfg.fine_step, cfg.burn_in)
    gens = [stream(cfg.seed, purpose, i) for i in range(lo, hi)]

    def eta_block(a, b):
        rows = _draw_increments_rows(cfg.triplet, cfg.fine_step, b - a, gens)
        return rows  # car1 noise coefficient is 1

    Y = run_scalar_plan(plan, eta_block, hi - lo)
    w = cfg.kernel((scheme.grid - scheme.u) / scheme.b_N)
    factor = scheme.delta_N / scheme.b_N
    if payload["mode"] == "clt":
        summands = (
            Y[:, base_idx]
            if lag <= 0 and payload["statistic"] == "mean"
            else Y[:, base_idx] * Y[:, shift_idx] - payload["center"]
        )
        return np.sqrt(factor) * (summands @ w)
    if payload["statistic"] == "mean":
        return factor * (Y[:, base_idx] @ w)
    return factor * ((Y[:, base_idx] * Y[:, shift_idx]) @ w)


def run_lln(config: ExperimentConfig, discrete: bool = True) -> ExperimentReport:
    """Replication RMSE of the localized statistics against the frozen targets.

    Discrete: kernel-weighted mean or lagged product over the observation
    grid, per N; passes when the RMSE is strictly decreasing over N_list and
    the final RMSE is below ``rmse_tol``. Continuous: time average over
    [0, t_end]; passes when each replication mean is within three standard
    errors of the integrated frozen mean.
    """
    _validate(config)
    if not discrete or config.kind == "lln_continuous":
        return _run_lln_continuous(config)
    model = config.model
    if config.statistic == "mean":
        target = stat.stationary_mean(model, config.u, config.triplet)
        lag = 0
    elif config.statistic == "autocov":
        lag = config.lag
        mean = stat.stationary_mean(model, config.u, config.triplet)
        target = float(stat.stationary_autocov(model, config.u, config.triplet, float(lag)))
        target += mean * mean  # the statistic estimates the uncentered product
    else:
        raise ValueError("statistic must be 'mean' or 'autocov'")

    rows, rmses = [], []
    for N in config.N_list:
        payload = {
            "config": config,
            "N": N,
            "lag": lag,
            "statistic": config.statistic,
            "mode": "lln",
            "purpose": f"lln:{config.statistic}:{config.step_rule.kind}:{N}",
        }
        vals = _map_chunks(_localized_chunk, payload, config.replications, config.workers)
        err_sq = (vals - target) ** 2
        rmse = float(np.sqrt(np.mean(err_sq)))
        se = float(np.std(err_sq, ddof=1) / np.sqrt(len(err_sq)) / (2.0 * max(rmse, 1e-300)))
        rows.append(
            {
                "N": N,
                "estimate": float(np.mean(vals)),
                "std_error": float(np.std(vals, ddof=1) / np.sqrt(len(vals))),
                "rmse": rmse,
                "rmse_std_error": se,
                "target": target,
                "pass": True,
            }
        )
        rmses.append(rmse)
    decreasing = all(b < a for a, b in zip(rmses, rmses[1:]))
    passed = bool(decreasing and rmses[-1] < config.rmse_tol)
    for i, row in enumerate(rows):
        dropped = i == 0 or rmses[i] < rmses[i - 1]
        row["pass"] = bool(dropped and (i < len(rows) - 1 or rmses[i] < config.rmse_tol))
    return ExperimentReport(
        kind="lln_discrete",
        passed=passed,
        rows=rows,
        summary={
            "statistic": config.statistic,
            "scheme": config.step_rule.kind,
            "lag": lag,
            "rmse": rmses,
            "strictly_decreasing": bool(decreasing),
            "final_rmse": rmses[-1],
            "rmse_tol": config.rmse_tol,
        },
    )


def _global_average_chunk(payload, lo, hi):
    cfg: ExperimentConfig = payload["config"]
    N = payload["N"]
    model = _as_car1(cfg.model)
    gap = payload["gap"]
    rescaled = gap * np.arange(cfg.n_quad + 1)
    plan = build_scalar_plan_rescaled(model, N, rescaled, payload["h_eff"], cfg.burn_in)
    gens = [stream(cfg.seed, f"lln_cont:{N}", i) for i in range(lo, hi)]

    def eta_block(a, b):
        return _draw_increments_rows(cfg.triplet, payload["h_eff"], b - a, gens)

    Y = run_scalar_plan(plan, eta_block, hi - lo)
    # (1/t) int_0^t Y dt in original time = (1/(N t)) trapezoid in rescaled time
    integral = np.trapezoid(Y, dx=gap, axis=1)
    return integral / (N * cfg.t_end)


def _run_lln_continuous(config: ExperimentConfig) -> ExperimentReport:
    from scipy import integrate

    model = config.model
    target, _ = integrate.quad(
        lambda v: stat.stationary_mean(model, v, config.triplet), 0.0, config.t_end, limit=400
    )
    target /= config.t_end
    rows = []
    all_ok = True
    for N in config.N_list:
        gap = N * config.t_end / config.n_quad
        h_eff = gap / max(1, int(round(gap / config.fine_step)))
        payload = {"config": config, "N": N, "gap": gap, "h_eff": h_eff}
        vals = _map_chunks(_global_average_chunk, payload, config.replications, config.workers)
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        ok = abs(est - target) <= 3.0 * se
        all_ok = all_ok and ok
        rows.append({"N": N, "estimate": est, "std_error": se, "target": float(target), "pass": bool(ok)})
    return ExperimentReport(
        kind="lln_continuous",
        passed=bool(all_ok),
        rows=rows,
        summary={"target": float(target), "t_end": config.t_end},
    )


# ---------------------------------------------------------------------------
# central limit experiment


def run_clt(config: ExperimentConfig, lag: int | None = None) -> ExperimentReport:
    """Standardize the scaled localized statistic by every candidate limit
    variance and test normality at the largest N.

    Requires the rectangular kernel, an admissible bandwidth/step chain
    (sqrt(m_N) b_N -> 0) and a centered driver. Records which candidate
    yields unit empirical variance.
    """
    _validate(config)
    if config.kernel.id != "rectangular":
        raise InadmissibleSchemeError(
            "the central limit statistic is established for the rectangular kernel only"
        )
    if not clt_admissible(config.bandwidth, config.step_rule):
        raise InadmissibleSchemeError(
            "bandwidth/step rules violate sqrt(m_N)*b_N -> 0 "
            f"(beta={config.bandwidth.beta}, rule={config.step_rule})"
        )
    mom = triplet_moments(config.triplet)
    if abs(mom.mu_L) > 1e-12:
        raise ValueError(
            f"driver mean is {mom.mu_L}; the statistic requires a centered driver "
            "(shift gamma by -mu_L, see noise.centered)"
        )
    if lag is None:
        lag = config.lag if config.kind == "clt_cov" else 0
    is_cov = config.kind == "clt_cov" or (lag and lag > 0)

    N = config.N_list[-1]
    scheme = make_scheme(config.u, N, config.bandwidth, config.step_rule)
    spacing = scheme.rescaled_spacing
    scheme_kind = ("O1", spacing) if scheme.kind == "O1" else "O2"

    if is_cov:
        center = float(stat.stationary_autocov(config.model, config.u, config.triplet, float(lag)))
        res = stat.sigma2_tilde(
            config.model, config.u, config.triplet, float(lag), scheme_kind,
            rng=stream(config.seed, "clt:sigma_tilde_mc", 0),
        )
        candidates = dict(res.candidates)
        var_tol = 0.15
        statistic = "autocov"
    else:
        center = 0.0
        res = stat.sigma2(config.model, config.u, config.triplet, scheme_kind)
        candidates = dict(res.candidates)
        var_tol = 0.10
        statistic = "mean"

    payload = {
        "config": config,
        "N": N,
        "lag": int(lag),
        "statistic": statistic,
        "mode": "clt",
        "center": center,
        "purpose": f"clt:{statistic}:{scheme.kind}:{N}",
    }
    T = _map_chunks(_localized_chunk, payload, config.replications, config.workers)
    R = len(T)
    mean_tol = 3.13 / np.sqrt(R)
    ks_band = 2.0 * 1.3581 / np.sqrt(R)

    per_candidate = {}
    winners = []
    for name, s2 in candidates.items():
        if s2 <= 0:
            per_candidate[name] = {"sigma2": float(s2), "valid": False}
            continue
        z = T / np.sqrt(s2)
        ks = stats.kstest(z, "norm").statistic
        entry = {
            "sigma2": float(s2),
            "mean": float(np.mean(z)),
            "variance": float(np.var(z, ddof=1)),
            "skewness": float(stats.skew(z)),
            "excess_kurtosis": float(stats.kurtosis(z)),
            "ks_distance": float(ks),
        }
        entry["mean_ok"] = bool(abs(entry["mean"]) < mean_tol)
        entry["variance_ok"] = bool(abs(entry["variance"] - 1.0) <= var_tol)
        entry["ks_ok"] = bool(ks < ks_band)
        # the lagged product statistic keeps visible finite-sample skewness at
        # desk-scale m_N; its acceptance window is the variance band, with the
        # distributional distance reported alongside
        gates = ("mean_ok", "variance_ok") if is_cov else ("mean_ok", "variance_ok", "ks_ok")
        entry["all_ok"] = bool(all(entry[g] for g in gates))
        per_candidate[name] = entry
        if entry["all_ok"]:
            winners.append(name)

    passed = len(winners) >= 1
    rows = [
        {
            "N": N,
            "estimate": float(np.mean(T)),
            "std_error": float(np.std(T, ddof=1) / np.sqrt(R)),
            "target": 0.0,
            "pass": bool(passed),
        }
    ]
    return ExperimentReport(
        kind=config.kind,
        passed=bool(passed),
        rows=rows,
        summary={
            "N": N,
            "lag": int(lag),
            "scheme": scheme.kind,
            "m_N": scheme.m_N,
            "rescaled_spacing": float(spacing),
            "replications": R,
            "mean_tol": float(mean_tol),
            "var_tol": float(var_tol),
            "ks_band": float(ks_band),
            "candidates": per_candidate,
            "winning_candidates": winners,
            "exactly_one_candidate": bool(len(winners) == 1),
            "raw_variance": float(np.var(T, ddof=1)),
        },
        replication_values=T,
    )


# ---------------------------------------------------------------------------
# Lipschitz continuity in the localization point


def _joint_frozen(model, triplet, u1, u2):
    fr1 = stat.freeze(model, u1)
    fr2 = stat.freeze(model, u2)
    A = linalg.block_diag(fr1.A, fr2.A)
    B = np.concatenate([fr1.B, -fr2.B])  # projects onto the difference
    C = np.concatenate([fr1.C, fr2.C])  # one shared driver
    return stat.FrozenSystem(A, B, C, margin=min(fr1.margin, fr2.margin))


def _lipschitz_chunk(payload, lo, hi):
    cfg: ExperimentConfig = payload["config"]
    fr = payload["frozen"]
    gaps = payload["gaps"]
    gens = [stream(cfg.seed, payload["purpose"], i) for i in range(lo, hi)]
    D = stat.simulate_stationary_batch(fr, cfg.triplet, gaps, hi - lo, gens)
    return np.mean(np.abs(D) ** cfg.p_norm, axis=1)


def run_lipschitz_u(config: ExperimentConfig) -> ExperimentReport:
    """Fit || frozen(u1) - frozen(u2) ||_{Lp} against |u1 - u2|.

    The two frozen processes are simulated jointly on one driver (a block
    system whose output is their difference), distances are averaged over
    replications and time points, and the log-log slope must be >= 0.9.
    The ladder is symmetric about u, which keeps the coefficient difference
    linear in the separation.
    """
    _validate(config)
    p = config.p_norm
    if p == 4:
        nu4 = triplet_moments(config.triplet).nu4
        if config.triplet.jumps is not None and not np.isfinite(nu4):
            raise ValueError("p_norm=4 requires a driver with finite fourth moment")
    mom = triplet_moments(config.triplet)
    rows, dists = [], []
    for j, eps in enumerate(config.ladder):
        u1, u2 = config.u - eps / 2.0, config.u + eps / 2.0
        if u1 <= 0:
            raise ValueError(f"ladder separation {eps} leaves positive time at u={config.u}")
        fr = _joint_frozen(config.model, config.triplet, u1, u2)
        spacing = 4.0 / fr.margin
        gaps = np.full(config.time_points - 1, spacing)
        payload = {
            "config": config,
            "frozen": fr,
            "gaps": gaps,
            "purpose": f"lipschitz:p{p}:{j}",
        }
        vals = _map_chunks(_lipschitz_chunk, payload, config.replications, config.workers)
        est_pow = float(np.mean(vals))
        dist = est_pow ** (1.0 / p)
        se_pow = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        se = se_pow / (p * max(est_pow, 1e-300) ** ((p - 1) / p))
        if p == 2:
            target = np.sqrt(stat.second_moment(fr, 0.0, config.triplet))
        else:
            target = stat.fourth_moment_integral(fr, 0.0, config.triplet) ** 0.25
        ok = abs(dist - target) <= 4.0 * se + 1e-15
        rows.append(
            {
                "separation": float(eps),
                "estimate": float(dist),
                "std_error": float(se),
                "target": float(target),
                "pass": bool(ok),
            }
        )
        dists.append(dist)
    slope, intercept = np.polyfit(np.log(config.ladder), np.log(dists), 1)
    passed = bool(slope >= 0.9)
    return ExperimentReport(
        kind="lipschitz_u",
        passed=passed,
        rows=rows,
        summary={
            "slope": float(slope),
            "intercept": float(intercept),
            "p_norm": p,
            "min_slope": 0.9,
            "driver_mean": float(mom.mu_L),
        },
    )


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.kind == "coupling":
        return run_coupling(config)
    if config.kind == "lln_discrete":
        return run_lln(config, discrete=True)
    if config.kind == "lln_continuous":
        return run_lln(config, discrete=False)
    if config.kind in ("clt_mean", "clt_cov"):
        return run_clt(config)
    if config.kind == "lipschitz_u":
        return run_lipschitz_u(config)
    raise ValueError(f"unknown experiment kind {config.kind!r}")
