"""Pure-numpy implementation of the hot scalar recursion.

Scans X[j+1] = phi[j] * X[j] + eta_t[j, r] for a batch of replications. The
scan is expressed as one suffix-product weighted matrix-vector product per
segment, which runs on BLAS instead of a Python loop. Suffix products stay
representable because callers cap segment lengths (see the plan builders in
``dynamics``).
"""

import numpy as np

BACKEND = "fallback"


def scan_segment(phi: np.ndarray, eta_t: np.ndarray, x: np.ndarray) -> None:
    """Advance states ``x`` (shape (R,)) through one segment, in place.

    phi: per-step decay factors, shape (m,).
    eta_t: per-step noise contributions, step-major, shape (m, R).
    """
    m = phi.shape[0]
    if eta_t.shape[0] != m:
        raise ValueError("phi and eta_t disagree on step count")
    if eta_t.shape[1] != x.shape[0]:
        raise ValueError("eta_t and x disagree on replication count")
    if m == 0:
        return
    total = float(np.prod(phi))
    if m == 1:
        x *= phi[0]
        x += eta_t[0]
        return
    # suffix[j] = prod(phi[j+1:]), suffix[m-1] = 1
    rev = np.cumprod(phi[::-1])
    suffix = np.empty(m)
    suffix[m - 1] = 1.0
    suffix[: m - 1] = rev[m - 2 :: -1]
    x *= total
    x += suffix @ eta_t
