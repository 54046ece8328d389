"""Localized sample statistics on observed paths.

All discrete statistics share the raw weighting (delta_N / b_N) K((tau - u) / b_N);
the weights are never renormalized because the limit-theorem scaling depends
on the raw factor. ``weight_sum`` reports the Riemann sum of the kernel as a
diagnostic.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import PathSample
from .kernels import LocalizingKernel
from .observation import ObservationScheme

__all__ = [
    "LocalizedStatistic",
    "localized_mean",
    "localized_autocov",
    "clt_statistic",
    "global_average",
    "localized_continuous_mean",
]

_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class LocalizedStatistic:
    value: float
    scheme: ObservationScheme
    kernel_id: str
    lag: int
    centered: bool
    weight_sum: float


def _match_times(times: np.ndarray, wanted: np.ndarray, what: str) -> np.ndarray:
    """Indices of ``wanted`` inside ``times``; errors on the first mismatch."""
    idx = np.searchsorted(times, wanted)
    idx = np.clip(idx, 0, len(times) - 1)
    left = np.clip(idx - 1, 0, len(times) - 1)
    use_left = np.abs(times[left] - wanted) < np.abs(times[idx] - wanted)
    idx = np.where(use_left, left, idx)
    err = np.abs(times[idx] - wanted)
    tol = _MATCH_TOL * np.maximum(1.0, np.abs(wanted))
    bad = np.nonzero(err > tol)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"{what}: no sample at required time index {i} "
            f"(wanted {wanted[i]!r}, nearest {times[idx[i]]!r})"
        )
    return idx


def _weights(scheme: ObservationScheme, kernel: LocalizingKernel):
    x = (scheme.grid - scheme.u) / scheme.b_N
    w = kernel(x)
    factor = scheme.delta_N / scheme.b_N
    return w, factor, float(factor * np.sum(w))


def _weighted_value(w: np.ndarray, values: np.ndarray, factor: float) -> float:
    return float(factor * np.dot(w, values))


def localized_mean(
    path: PathSample, scheme: ObservationScheme, kernel: LocalizingKernel
) -> LocalizedStatistic:
    """(delta_N / b_N) sum_i K((tau_i - u)/b_N) Y(tau_i)."""
    if path.times.shape == scheme.grid.shape and np.all(
        np.abs(path.times - scheme.grid) <= _MATCH_TOL * np.maximum(1.0, np.abs(scheme.grid))
    ):
        values = path.values
    else:
        idx = _match_times(path.times, scheme.grid, "localized_mean")
        values = path.values[idx]
    w, factor, wsum = _weights(scheme, kernel)
    return LocalizedStatistic(
        value=_weighted_value(w, values, factor),
        scheme=scheme,
        kernel_id=kernel.id,
        lag=0,
        centered=False,
        weight_sum=wsum,
    )


def localized_autocov(
    path: PathSample, scheme: ObservationScheme, kernel: LocalizingKernel, k: int
) -> LocalizedStatistic:
    """(delta_N / b_N) sum_i K((tau_i - u)/b_N) Y(tau_i) Y(tau_i + k/N).

    The path must contain samples at the grid and at the grid shifted by k/N;
    no interpolation is performed.
    """
    if k < 0:
        raise ValueError("lag k must be nonnegative")
    base_idx = _match_times(path.times, scheme.grid, "localized_autocov (grid)")
    shifted = scheme.grid + k / scheme.N
    shift_idx = _match_times(path.times, shifted, "localized_autocov (shifted grid)")
    products = path.values[base_idx] * path.values[shift_idx]
    w, factor, wsum = _weights(scheme, kernel)
    return LocalizedStatistic(
        value=_weighted_value(w, products, factor),
        scheme=scheme,
        kernel_id=kernel.id,
        lag=k,
        centered=False,
        weight_sum=wsum,
    )


def clt_statistic(
    path: PathSample,
    scheme: ObservationScheme,
    kernel: LocalizingKernel,
    k: int | None = None,
    center: float = 0.0,
) -> float:
    """sqrt(delta_N / b_N) sum_i K_rect((tau_i - u)/b_N) S_i.

    S_i = Y(tau_i) for the mean statistic (center must be 0) and
    S_i = Y(tau_i) Y(tau_i + k/N) - center for the lagged product statistic.
    Only the rectangular kernel is supported; the limit theorem behind this
    scaling is established for that kernel alone.
    """
    if kernel.id != "rectangular":
        raise ValueError(
            f"clt_statistic requires the rectangular kernel, got {kernel.id!r}"
        )
    if k is None:
        if center != 0.0:
            raise ValueError("mean statistic admits no centering constant; pass center=0")
        idx = _match_times(path.times, scheme.grid, "clt_statistic")
        summands = path.values[idx]
    else:
        base_idx = _match_times(path.times, scheme.grid, "clt_statistic (grid)")
        shift_idx = _match_times(path.times, scheme.grid + k / scheme.N, "clt_statistic (shifted)")
        summands = path.values[base_idx] * path.values[shift_idx] - center
    w, factor, _ = _weights(scheme, kernel)
    return float(np.sqrt(factor) * np.dot(w, summands))


def _uniform_cover(path: PathSample, lo: float, hi: float, name: str):
    times = path.times
    if times[0] > lo + 1e-9 or times[-1] < hi - 1e-9:
        raise ValueError(f"{name}: path grid [{times[0]}, {times[-1]}] does not cover [{lo}, {hi}]")
    gaps = np.diff(times)
    if gaps.size and np.max(np.abs(gaps - gaps[0])) > 1e-9 * max(1.0, gaps[0]):
        raise ValueError(f"{name}: path grid is not uniform")
    mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    return times[mask], path.values[mask]


def global_average(path: PathSample, t: float) -> float:
    """(1/t) int_0^t Y(nu) dnu by the trapezoid rule on a uniform grid."""
    if t <= 0:
        raise ValueError("t must be positive")
    times, values = _uniform_cover(path, 0.0, t, "global_average")
    return float(np.trapezoid(values, times) / t)


def localized_continuous_mean(
    path: PathSample, u: float, b: float, kernel: LocalizingKernel
) -> float:
    """(1/b) int_{u-b}^{u+b} K((tau - u)/b) Y(tau) dtau by the trapezoid rule.

    Requires a differentiable kernel; the continuous-observation limit
    theorem needs the kernel derivative for its integration by parts.
    """
    if not kernel.differentiable:
        raise ValueError(
            f"localized_continuous_mean requires a differentiable kernel, got {kernel.id!r}"
        )
    times, values = _uniform_cover(path, u - b, u + b, "localized_continuous_mean")
    integrand = kernel((times - u) / b) * values
    return float(np.trapezoid(integrand, times) / b)
