"""Time-varying linear state dynamics.

Covers the coefficient-function model types, the transition matrix of
dPsi/dt = A(t) Psi with Psi(t0, t0) = I by three methods, and simulation of
the rescaled process

    Y_N(t) = B(t)' X(N t),    dX(s) = A(s/N) X(s) ds + C(s/N) L(ds),

by a state recursion on a fine grid in rescaled time s. The recursion uses
a midpoint one-step propagator (exact integral of the coefficient to second
order) and left-point noise weighting; its O(h) bias is checked by the
refinement tests rather than hidden behind richer schemes.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from . import _core
from .noise import LevyTriplet

__all__ = [
    "Lipschitz",
    "ModelSpec",
    "Car1Spec",
    "PathSample",
    "FineGrid",
    "transition_matrix",
    "transition_seminorm_check",
    "simulate_yn",
    "refine_path",
    "validate_model",
    "validate_car1",
    "build_scalar_plan",
    "build_scalar_plan_rescaled",
    "run_scalar_plan",
    "PeanoBakerNonConvergence",
]


class PeanoBakerNonConvergence(RuntimeError):
    """Truncated series still moving at the requested order."""


@dataclass(frozen=True)
class Lipschitz:
    L_A: float
    L_B: float = 0.0
    L_C: float = 0.0


@dataclass(frozen=True)
class ModelSpec:
    """General state space coefficients A(t) (p,p), B(t) (p,), C(t) (p,).

    ``commuting`` declares [A(t), A(s)] = 0 for all s, t; ``stability_margin``
    declares a uniform bound -max_j Re lambda_j(A(t)) >= margin > 0. Both are
    declarations checked by sampling in :func:`validate_model`, not recomputed
    on every call.
    """

    p: int
    A: Callable[[float], np.ndarray]
    B: Callable[[float], np.ndarray]
    C: Callable[[float], np.ndarray]
    lipschitz: Lipschitz
    commuting: bool
    stability_margin: float
    model_id: str = "statespace"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("state dimension must be positive")
        if self.stability_margin <= 0:
            raise ValueError("stability margin must be positive")


@dataclass(frozen=True)
class Car1Spec:
    """Scalar mean-reversion model dY = -a(t) Y dt + L(dt) with a(t) > 0."""

    a: Callable
    lipschitz_a: float
    infimum_a: float
    model_id: str = "car1"

    def __post_init__(self):
        if self.infimum_a <= 0:
            raise ValueError("infimum of a must be positive")

    @property
    def stability_margin(self) -> float:
        return self.infimum_a

    @property
    def p(self) -> int:
        return 1

    def to_state_space(self) -> ModelSpec:
        a = self.a
        return ModelSpec(
            p=1,
            A=lambda t: np.atleast_2d(-np.asarray(a(t), dtype=float)),
            B=lambda t: np.ones(1),
            C=lambda t: np.ones(1),
            lipschitz=Lipschitz(L_A=self.lipschitz_a),
            commuting=True,
            stability_margin=self.infimum_a,
            model_id=self.model_id,
        )


@dataclass(frozen=True)
class FineGrid:
    """Simulation grid record kept for coupled re-use of the noise."""

    step: float
    start: float  # rescaled time of the first fine node
    increments: np.ndarray | None
    gaussian_only: bool


@dataclass
class PathSample:
    times: np.ndarray
    values: np.ndarray
    fine_grid: FineGrid | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")


# ---------------------------------------------------------------------------
# model validation


@dataclass(frozen=True)
class ModelValidation:
    commuting_ok: bool
    margin_ok: bool
    lipschitz_ok: bool
    detail: dict

    @property
    def passed(self) -> bool:
        return self.commuting_ok and self.margin_ok and self.lipschitz_ok


def validate_model(
    spec: ModelSpec, t_range=(-5.0, 5.0), n_samples: int = 100, rng=None
) -> ModelValidation:
    """Sampled checks of the declared commutation, margin and Lipschitz data."""
    rng = rng if rng is not None else np.random.default_rng(0)
    lo, hi = t_range
    ts = rng.uniform(lo, hi, size=n_samples)
    ss = rng.uniform(lo, hi, size=n_samples)

    commuting_ok = True
    if spec.commuting:
        for t, s in zip(ts, ss):
            At, As = spec.A(t), spec.A(s)
            comm = At @ As - As @ At
            bound = 1e-10 * max(np.linalg.norm(At) * np.linalg.norm(As), 1e-300)
            if np.linalg.norm(comm) > bound:
                commuting_ok = False
                break

    margin_ok = True
    worst = -np.inf
    for t in ts:
        top = float(np.max(np.real(np.linalg.eigvals(spec.A(t)))))
        worst = max(worst, top)
        if top > -spec.stability_margin + 1e-8:
            margin_ok = False

    lipschitz_ok = True
    for t, s in zip(ts, ss):
        gap = abs(t - s)
        if gap == 0.0:
            continue
        slack = 1e-9 * max(1.0, gap)
        if np.linalg.norm(spec.A(t) - spec.A(s)) > spec.lipschitz.L_A * gap + slack:
            lipschitz_ok = False
        if np.linalg.norm(spec.B(t) - spec.B(s)) > spec.lipschitz.L_B * gap + slack:
            lipschitz_ok = False
        if np.linalg.norm(spec.C(t) - spec.C(s)) > spec.lipschitz.L_C * gap + slack:
            lipschitz_ok = False

    return ModelValidation(
        commuting_ok,
        margin_ok,
        lipschitz_ok,
        detail={"worst_real_part": worst, "n_samples": n_samples},
    )


def validate_car1(
    spec: Car1Spec, t_range=(-5.0, 5.0), n_grid: int = 1000, rng=None
) -> ModelValidation:
    rng = rng if rng is not None else np.random.default_rng(0)
    lo, hi = t_range
    grid = np.linspace(lo, hi, n_grid)
    vals = np.asarray(spec.a(grid), dtype=float)
    margin_ok = bool(np.all(vals >= spec.infimum_a - 1e-12))
    ts = rng.uniform(lo, hi, size=200)
    ss = rng.uniform(lo, hi, size=200)
    diffs = np.abs(np.asarray(spec.a(ts)) - np.asarray(spec.a(ss)))
    lipschitz_ok = bool(np.all(diffs <= spec.lipschitz_a * np.abs(ts - ss) + 1e-9))
    return ModelValidation(True, margin_ok, lipschitz_ok, detail={"min_a": float(vals.min())})


# ---------------------------------------------------------------------------
# transition matrices


def _integral_of_A(spec: ModelSpec, t0: float, t1: float) -> np.ndarray:
    if t1 == t0:
        return np.zeros((spec.p, spec.p))
    result, _ = integrate.quad_vec(
        lambda tau: np.asarray(spec.A(tau), dtype=float), t0, t1, epsabs=1e-13, epsrel=1e-13
    )
    return result


def _peano_baker(spec: ModelSpec, t0: float, t1: float, order: int, nodes: int | None) -> np.ndarray:
    span = t1 - t0
    if nodes is None:
        nodes = int(max(129, 64 * np.ceil(max(span, 1.0)) + 1))
    if nodes % 2 == 0:
        nodes += 1
    ts = np.linspace(t0, t1, nodes)
    A_vals = np.stack([np.asarray(spec.A(t), dtype=float) for t in ts])  # (n, p, p)
    eye = np.eye(spec.p)
    term = np.broadcast_to(eye, A_vals.shape).copy()  # I_0 on every node
    total = eye.copy()
    last_norm = np.inf
    for _ in range(order):
        integrand = A_vals @ term
        term = integrate.cumulative_simpson(integrand, x=ts, axis=0, initial=0.0)
        total = total + term[-1]
        last_norm = np.linalg.norm(term[-1])
    if last_norm > 1e-8 * max(np.linalg.norm(total), 1e-300):
        raise PeanoBakerNonConvergence(
            f"series tail norm {last_norm:.3e} exceeds 1e-8 of partial sum; increase order"
        )
    return total


def _rk4(spec: ModelSpec, t0: float, t1: float, step: float, psi0: np.ndarray) -> np.ndarray:
    span = t1 - t0
    n = max(1, int(np.ceil(span / step - 1e-12)))
    h = span / n
    psi = psi0.copy()
    t = t0
    for _ in range(n):
        k1 = spec.A(t) @ psi
        k2 = spec.A(t + h / 2) @ (psi + (h / 2) * k1)
        k3 = spec.A(t + h / 2) @ (psi + (h / 2) * k2)
        k4 = spec.A(t + h) @ (psi + h * k3)
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return psi


def transition_matrix(
    spec: ModelSpec,
    t1: float,
    t0: float,
    method: str = "commuting_exp",
    order: int = 18,
    step: float = 1e-3,
    nodes: int | None = None,
) -> np.ndarray:
    """Transition matrix Psi(t1, t0) of the coefficient function A.

    methods:
      commuting_exp    expm of the quadrature integral of A (requires the
                       declared commutation property)
      peano_baker      truncated iterated-integral series, composite Simpson
                       for the nested integrals
      ode_rk4          fixed-step RK4 on the matrix initial value problem
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return np.eye(spec.p)
    if method == "commuting_exp":
        if not spec.commuting:
            raise ValueError("commuting_exp requires a spec declared commuting")
        return linalg.expm(_integral_of_A(spec, t0, t1))
    if method == "peano_baker":
        return _peano_baker(spec, t0, t1, order, nodes)
    if method == "ode_rk4":
        return _rk4(spec, t0, t1, step, np.eye(spec.p))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class SeminormReport:
    gamma_hat: float
    lambda_hat: float
    ok: bool
    n_samples: int


def transition_seminorm_check(
    spec: ModelSpec, t_range=(0.0, 10.0), n_samples: int = 50, rng=None
) -> SeminormReport:
    """Fit log ||Psi(t, t0)|| against t - t0 and compare the decay rate
    with the declared stability margin. Diagnostic only."""
    rng = rng if rng is not None else np.random.default_rng(1)
    lo, hi = t_range
    margin = spec.stability_margin
    spans = rng.uniform(0.5 / margin, 5.0 / margin, size=n_samples)
    starts = rng.uniform(lo, hi, size=n_samples)
    method = "commuting_exp" if spec.commuting else "ode_rk4"
    xs, ys = [], []
    for t0, span in zip(starts, spans):
        psi = transition_matrix(spec, t0 + span, t0, method=method)
        nrm = np.linalg.norm(psi, 2)
        if nrm <= 0:
            continue
        xs.append(span)
        ys.append(np.log(nrm))
    slope, intercept = np.polyfit(np.asarray(xs), np.asarray(ys), 1)
    lam = -float(slope)
    return SeminormReport(
        gamma_hat=float(np.exp(intercept)),
        lambda_hat=lam,
        ok=bool(lam >= margin / 2),
        n_samples=n_samples,
    )


# ---------------------------------------------------------------------------
# simulation of Y_N


@dataclass
class ScalarPlan:
    """Precomputed fine-grid data for the scalar recursion at one N."""

    N: int
    h: float
    start: float
    n_steps: int
    record_steps: np.ndarray  # step counts after which state is recorded
    phi: np.ndarray  # (n_steps,) one-step decay factors
    c_weights: np.ndarray  # (n_steps,) left-point noise coefficients
    segment_bounds: list

    @property
    def eval_rescaled(self) -> np.ndarray:
        return self.start + self.record_steps * self.h


_SEG_LOG_CAP = 400.0


def _split_segments(record_steps: np.ndarray, phi: np.ndarray, h: float) -> list:
    """Segment the grid at record points, capping lengths so suffix products
    of phi stay representable in the fallback scan."""
    logs = -np.log(np.maximum(phi, 1e-300))
    max_rate = float(logs.max()) / h if len(logs) else 0.0
    cap = max(1, int(np.floor(_SEG_LOG_CAP / max(max_rate * h, 1e-12))))
    bounds = []
    prev = 0
    for stop in record_steps:
        lo = prev
        while stop - lo > cap:
            bounds.append((lo, lo + cap, False))
            lo += cap
        bounds.append((lo, int(stop), True))
        prev = int(stop)
    return bounds


def build_scalar_plan(
    spec: Car1Spec, N: int, eval_times: np.ndarray, h: float, burn_in: float
) -> ScalarPlan:
    """Grid layout, per-step decay factors and noise weights for one run."""
    eval_times = np.asarray(eval_times, dtype=float)
    if eval_times.size == 0:
        raise ValueError("need at least one evaluation time")
    if eval_times.size > 1 and not np.all(np.diff(eval_times) > 0):
        raise ValueError("eval_times must be strictly increasing")
    return build_scalar_plan_rescaled(spec, N, N * eval_times, h, burn_in)


def build_scalar_plan_rescaled(
    spec: Car1Spec, N: int, rescaled: np.ndarray, h: float, burn_in: float
) -> ScalarPlan:
    """Plan builder taking evaluation nodes directly in rescaled time s = N t,
    avoiding a lossy round trip through original time."""
    rescaled = np.asarray(rescaled, dtype=float)
    if h <= 0:
        raise ValueError("fine_step must be positive")
    min_burn = 8.0 / spec.stability_margin
    if burn_in < min_burn - 1e-9:
        raise ValueError(f"burn_in {burn_in} below required {min_burn} (8 / stability margin)")

    gaps = np.diff(rescaled)
    if gaps.size and h > gaps.min() + 1e-12:
        raise ValueError("fine_step exceeds the smallest rescaled evaluation gap")
    steps_per_gap = np.rint(gaps / h).astype(int)
    for i, (m, gap) in enumerate(zip(steps_per_gap, gaps)):
        if m < 1 or abs(m * h - gap) > 1e-12 * max(1.0, abs(gap)):
            raise ValueError(
                f"fine_step {h} does not divide evaluation gap {gap} at index {i}"
            )
    n_burn = int(np.ceil(burn_in / h - 1e-12))
    start = rescaled[0] - n_burn * h
    record_steps = n_burn + np.concatenate([[0], np.cumsum(steps_per_gap)])
    n_steps = int(record_steps[-1])

    mids = start + (np.arange(n_steps) + 0.5) * h
    a_mid = np.asarray(spec.a(mids / N), dtype=float)
    phi = np.exp(-a_mid * h)
    c_weights = np.ones(n_steps)
    bounds = _split_segments(record_steps, phi, h)
    return ScalarPlan(N, h, start, n_steps, record_steps, phi, c_weights, bounds)


def run_scalar_plan(plan: ScalarPlan, eta_block, R: int, x0=None) -> np.ndarray:
    """Run the recursion for R replications; returns states (R, n_records).

    ``eta_block(lo, hi)`` must return the noise contributions for steps
    [lo, hi) as an (R, hi - lo) array, in a caller-fixed draw order.
    """
    x = np.zeros(R) if x0 is None else np.array(x0, dtype=float)
    out = np.empty((R, len(plan.record_steps)))
    rec = 0
    if plan.record_steps[0] == 0:
        out[:, 0] = x
        rec = 1
    for lo, hi, is_record in plan.segment_bounds:
        if hi > lo:
            eta_t = np.ascontiguousarray(eta_block(lo, hi).T)  # step-major for the core
            _core.scan_segment(np.ascontiguousarray(plan.phi[lo:hi]), eta_t, x)
        if is_record:
            out[:, rec] = x
            rec += 1
    return out


def _draw_increments_rows(triplet: LevyTriplet, h: float, n: int, gens) -> np.ndarray:
    """Increment rows, one generator per replication, fixed draw order."""
    R = len(gens)
    out = np.empty((R, n))
    sig = np.sqrt(triplet.sigma2 * h)
    drift = triplet.path_drift
    jumps = triplet.jumps
    for r, gen in enumerate(gens):
        row = drift * h + (sig * gen.standard_normal(n) if sig > 0 else 0.0)
        if not np.ndim(row):
            row = np.full(n, row)
        if jumps is not None and jumps.rate > 0:
            counts = gen.poisson(jumps.rate * h, size=n)
            total = int(counts.sum())
            if total:
                sizes = jumps.sample(total, gen)
                cells = np.repeat(np.arange(n), counts)
                row = row + np.bincount(cells, weights=sizes, minlength=n)
        out[r] = row
    return out


def simulate_yn(
    spec,
    triplet: LevyTriplet,
    N: int,
    eval_times,
    fine_step: float,
    burn_in: float,
    rng: np.random.Generator,
    keep_increments: bool = True,
    increments: np.ndarray | None = None,
    meta: dict | None = None,
) -> PathSample:
    """Simulate Y_N at the given original-time evaluation points.

    State starts at zero a burn-in before the first evaluation; the burn-in
    must be at least 8 / stability_margin so the truncated history is below
    Monte Carlo resolution. Passing ``increments`` re-runs the recursion on
    externally supplied noise (coupled experiments, refinement checks).
    """
    eval_times = np.asarray(eval_times, dtype=float)
    if isinstance(spec, Car1Spec):
        plan = build_scalar_plan(spec, N, eval_times, fine_step, burn_in)
        if increments is None:
            inc = _draw_increments_rows(triplet, fine_step, plan.n_steps, [rng])[0]
        else:
            inc = np.asarray(increments, dtype=float)
            if inc.shape != (plan.n_steps,):
                raise ValueError(f"increments must have shape ({plan.n_steps},)")
        eta_row = (plan.c_weights * inc)[None, :]
        states = run_scalar_plan(plan, lambda lo, hi: np.ascontiguousarray(eta_row[:, lo:hi]), 1)
        values = states[0]
        grid = FineGrid(
            step=fine_step,
            start=plan.start,
            increments=inc if keep_increments else None,
            gaussian_only=triplet.jumps is None or triplet.jump_rate == 0.0,
        )
        info = {"N": N, "model_id": spec.model_id}
        if meta:
            info.update(meta)
        return PathSample(times=eval_times, values=values, fine_grid=grid, meta=info)
    return _simulate_yn_statespace(
        spec, triplet, N, eval_times, fine_step, burn_in, rng, keep_increments, increments, meta
    )


def _simulate_yn_statespace(
    spec: ModelSpec,
    triplet,
    N,
    eval_times,
    fine_step,
    burn_in,
    rng,
    keep_increments,
    increments,
    meta,
):
    h = fine_step
    min_burn = 8.0 / spec.stability_margin
    if burn_in < min_burn - 1e-9:
        raise ValueError(f"burn_in {burn_in} below required {min_burn} (8 / stability margin)")
    rescaled = N * np.asarray(eval_times, dtype=float)
    gaps = np.diff(rescaled)
    if gaps.size and h > gaps.min() + 1e-12:
        raise ValueError("fine_step exceeds the smallest rescaled evaluation gap")
    steps_per_gap = np.rint(gaps / h).astype(int)
    for i, (m, gap) in enumerate(zip(steps_per_gap, gaps)):
        if m < 1 or abs(m * h - gap) > 1e-12 * max(1.0, abs(gap)):
            raise ValueError(f"fine_step {h} does not divide evaluation gap {gap} at index {i}")
    n_burn = int(np.ceil(burn_in / h - 1e-12))
    record_steps = n_burn + np.concatenate([[0], np.cumsum(steps_per_gap)])
    n_steps = int(record_steps[-1])
    start = rescaled[0] - n_burn * h

    if increments is None:
        inc = _draw_increments_rows(triplet, h, n_steps, [rng])[0]
    else:
        inc = np.asarray(increments, dtype=float)
        if inc.shape != (n_steps,):
            raise ValueError(f"increments must have shape ({n_steps},)")

    record_set = set(int(k) for k in record_steps)
    x = np.zeros(spec.p)
    values = np.empty(len(record_steps))
    rec = 0
    if 0 in record_set:
        values[rec] = float(spec.B(start / N) @ x)
        rec += 1
    eye = np.eye(spec.p)
    for j in range(n_steps):
        s_left = start + j * h
        mid = (s_left + 0.5 * h) / N
        if spec.commuting:
            prop = linalg.expm(np.asarray(spec.A(mid), dtype=float) * h)
        else:
            prop = _rk4(spec, s_left / N, (s_left + h) / N, h, eye)
        x = prop @ x + np.asarray(spec.C(s_left / N), dtype=float) * inc[j]
        if (j + 1) in record_set:
            t_eval = (start + (j + 1) * h) / N
            values[rec] = float(np.asarray(spec.B(t_eval), dtype=float) @ x)
            rec += 1
    grid = FineGrid(
        step=h,
        start=start,
        increments=inc if keep_increments else None,
        gaussian_only=triplet.jumps is None or triplet.jump_rate == 0.0,
    )
    info = {"N": N, "model_id": spec.model_id}
    if meta:
        info.update(meta)
    return PathSample(np.asarray(eval_times, dtype=float), values, grid, info)


def refine_path(
    spec,
    triplet: LevyTriplet,
    path: PathSample,
    rng: np.random.Generator,
) -> PathSample:
    """Re-simulate on the same noise at half the step.

    Each retained increment is split into two conditionally on its total
    (a bridge draw), so the refined path is driven by the same underlying
    noise. Only drift + Gaussian drivers split exactly this way.
    """
    grid = path.fine_grid
    if grid is None or grid.increments is None:
        raise ValueError("path does not retain increments")
    if not grid.gaussian_only:
        raise ValueError("increment splitting implemented for Gaussian drivers only")
    h = grid.step
    inc = grid.increments
    half = np.empty(2 * inc.size)
    bridge = 0.5 * np.sqrt(triplet.sigma2 * h) * rng.standard_normal(inc.size)
    first = 0.5 * inc + bridge
    half[0::2] = first
    half[1::2] = inc - first
    # same rescaled burn-in span, so the fine grid start is unchanged and the
    # halved-step burn-in step count doubles exactly
    burn = path.times[0] * path.meta["N"] - grid.start
    return simulate_yn(
        spec,
        triplet,
        path.meta["N"],
        path.times,
        h / 2,
        burn,
        rng,
        keep_increments=True,
        increments=half,
    )
