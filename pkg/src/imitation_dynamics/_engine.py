"""Low-level stepping kernels over CSR adjacency, JIT-compiled when numba is present.

The public operations in game.py and dynamics.py are the reference
implementations; these kernels exist so that long integrations stay fast.
Their outputs are equivalence-tested against the reference path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


@njit(cache=True)
def payoff_kernel(indptr, indices, x, a, b, c, d, out):
    n = x.size
    for i in range(n):
        xi = x[i]
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            xj = x[indices[k]]
            acc += xi * (a * xj + b * (1.0 - xj)) + (1.0 - xi) * (c * xj + d * (1.0 - xj))
        out[i] = acc


@njit(cache=True)
def drift_kernel(indptr, indices, P, x, out):
    """Writes f into out and returns max |f_i|.

    f_i is the positive-part-weighted pull toward strictly better neighbors;
    rows with no strictly better neighbor drift 0.
    """
    n = x.size
    maxf = 0.0
    for i in range(n):
        Pi = P[i]
        xi = x[i]
        den = 0.0
        num = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            gain = P[j] - Pi
            if gain > 0.0:
                den += gain
                num += gain * (x[j] - xi)
        fi = num / den if den > 0.0 else 0.0
        out[i] = fi
        if abs(fi) > maxf:
            maxf = abs(fi)
    return maxf


@njit(cache=True)
def euler_block(indptr, indices, x, a, b, c, d, eps, tol, nsteps):
    """Advance x in place by up to nsteps Euler updates.

    Convergence is checked before each update, so a converged state is never
    stepped. Returns (steps_taken, converged).
    """
    n = x.size
    P = np.empty(n)
    f = np.empty(n)
    for it in range(nsteps):
        payoff_kernel(indptr, indices, x, a, b, c, d, P)
        maxf = drift_kernel(indptr, indices, P, x, f)
        if maxf <= tol:
            return it, True
        for i in range(n):
            x[i] += eps * f[i]
    return nsteps, False


def drift_eval(indptr, indices, x, a, b, c, d):
    """Drift vector and its max magnitude at x (kernel-backed)."""
    P = np.empty(x.size)
    f = np.empty(x.size)
    payoff_kernel(indptr, indices, x, a, b, c, d, P)
    maxf = drift_kernel(indptr, indices, P, x, f)
    return f, maxf
