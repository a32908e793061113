"""Closed-form kernels, sigmoid/ramp weights and fast exponential convolution.

The three weights used by the monotonicity machinery:

* ``psi``      -- smooth sigmoid (2/pi) arctan(exp(x/6)), with closed-form
                  first and third derivatives (no numerical differentiation).
* ``phi_ramp`` -- the 0 / x/2 / 1 ramp, reaching 1 at x = 2.
* ``ramp``     -- generic affine ramp between two abscissae.

The exponential convolution ``exp_convolve`` applies the Green kernel
p(x) = exp(-|x|)/2 of (1 - d^2/dx^2)^(-1) in O(N) with the exact per-step
decay factor e^(-h) and trapezoid end corrections; the result coincides with
dense trapezoid quadrature of the convolution integral up to rounding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .grid import GridFunction

# -----------------------------------------------------------------------
# sigmoid weight and its derivatives
# -----------------------------------------------------------------------


def psi(x):
    """Sigmoid weight (2/pi) arctan(exp(x/6)); increasing 0 -> 1, psi(0)=1/2.

    Evaluated through exp(-|x|/6) so it never overflows.
    """
    x = np.asarray(x, dtype=float)
    t = np.exp(-np.abs(x) / 6.0)
    pos = (2.0 / np.pi) * (np.pi / 2.0 - np.arctan(t))
    neg = (2.0 / np.pi) * np.arctan(t)
    return np.where(x >= 0, pos, neg)


def psi_prime(x):
    """psi'(x) = sech(x/6)/(6 pi) = e^(x/6) / (3 pi (1 + e^(x/3))); even."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (6.0 * np.pi * np.cosh(x / 6.0))


def psi_ppp(x):
    """Third derivative of psi in closed form."""
    t = np.asarray(x, dtype=float) / 6.0
    s = 1.0 / np.cosh(t)
    th = np.tanh(t)
    return s * (th * th - s * s) / (216.0 * np.pi)


def phi_ramp(x):
    """Ramp weight: 0 for x <= 0, x/2 on [0, 2], 1 for x >= 2."""
    return np.clip(np.asarray(x, dtype=float) / 2.0, 0.0, 1.0)


def phi_ramp_prime(x):
    """Derivative of phi_ramp: 1/2 on (0, 2), 0 outside."""
    x = np.asarray(x, dtype=float)
    return np.where((x > 0.0) & (x < 2.0), 0.5, 0.0)


def ramp(x, a: float, b: float):
    """Affine ramp: 0 left of a, 1 right of b. Requires a < b."""
    if not a < b:
        raise ValueError(f"ramp requires a < b, got a={a}, b={b}")
    return np.clip((np.asarray(x, dtype=float) - a) / (b - a), 0.0, 1.0)


class WeightKind(enum.Enum):
    PSI_SIGMOID = "psi_sigmoid"
    PHI_RAMP02 = "phi_ramp02"
    RAMP = "ramp"


class Orientation(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class WeightSpec:
    """Parametric weight: kind, shift and orientation.

    Increasing orientation evaluates w(x - shift); decreasing evaluates the
    complement 1 - w(x - shift).  Values are always in [0, 1], monotone in
    the declared orientation.
    """

    kind: WeightKind
    shift: float = 0.0
    orientation: Orientation = Orientation.INCREASING
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind is WeightKind.RAMP and not self.a < self.b:
            raise ValueError(f"Ramp requires a < b, got a={self.a}, b={self.b}")


def eval_weight(spec: WeightSpec, x):
    s = np.asarray(x, dtype=float) - spec.shift
    if spec.kind is WeightKind.PSI_SIGMOID:
        w = psi(s)
    elif spec.kind is WeightKind.PHI_RAMP02:
        w = phi_ramp(s)
    else:
        w = ramp(s, spec.a, spec.b)
    if spec.orientation is Orientation.DECREASING:
        w = 1.0 - w
    return w


# -----------------------------------------------------------------------
# closed-form kernels
# -----------------------------------------------------------------------


def green_p(x):
    """Green kernel p(x) = exp(-|x|)/2 of the inverse Helmholtz operator."""
    return 0.5 * np.exp(-np.abs(np.asarray(x, dtype=float)))


def peakon_profile(x, c: float = 1.0, x0: float = 0.0):
    """Traveling-wave profile c * exp(-|x - x0|) (antipeakon for c < 0)."""
    return c * np.exp(-np.abs(np.asarray(x, dtype=float) - x0))


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    z = np.linspace(-1.0, 1.0, 200001)
    return trapz_plain(_bump(z), z[1] - z[0])


def trapz_plain(v, h):
    return float(np.trapezoid(v, dx=h))


def _bump(x):
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 / (x[inside] ** 2 - 1.0))
    return out


def mollifier(x, n: int):
    """Standard bump mollifier with support [-1/n, 1/n] and unit mass."""
    if n < 1:
        raise ValueError("mollifier index n must be a positive integer")
    x = np.asarray(x, dtype=float)
    return n * _bump(n * x) / _bump_mass()


# Gauss-Legendre nodes reused for every bump quadrature.
_GAUSS_N = 192


@lru_cache(maxsize=1)
def _gauss_unit():
    return np.polynomial.legendre.leggauss(_GAUSS_N)


def _gauss_on(a: float, b: float):
    z, w = _gauss_unit()
    return 0.5 * (b - a) * z + 0.5 * (a + b), 0.5 * (b - a) * w


@lru_cache(maxsize=32)
def _moll_green_table(n: int):
    """Tabulated (p * rho_n)(xi) inside the bump support, for interpolation."""
    half = 1.0 / n
    xg, wg = _gauss_on(-half, half)
    rho_vals = mollifier(xg, n) * wg
    xi = np.linspace(-half, half, 4097)
    tab = np.zeros_like(xi)
    for rv, z in zip(rho_vals, xg):
        tab += rv * 0.5 * np.exp(-np.abs(xi - z))
    # decay factors of the pure-exponential tails outside the support
    kplus = float(np.sum(rho_vals * np.exp(xg)))    # int rho_n(w) e^w dw
    kminus = float(np.sum(rho_vals * np.exp(-xg)))
    return xi, tab, kplus, kminus


def mollified_green(xi, n: int):
    """(p * rho_n)(xi): the Green kernel mollified at scale 1/n.

    Exact exponential tails outside the bump support |xi| > 1/n, dense
    tabulated quadrature inside.
    """
    xi = np.asarray(xi, dtype=float)
    tab_x, tab, kplus, kminus = _moll_green_table(n)
    half = 1.0 / n
    out = np.empty_like(xi)
    inside = np.abs(xi) <= half
    out[inside] = np.interp(xi[inside], tab_x, tab)
    right = xi > half
    left = xi < -half
    out[right] = 0.5 * kplus * np.exp(-xi[right])
    out[left] = 0.5 * kminus * np.exp(xi[left])
    return out


# -----------------------------------------------------------------------
# exponential convolution, O(N)
# -----------------------------------------------------------------------


def _exp_passes(values: np.ndarray, h: float):
    """One-sided accumulations L_i = int_{x<=x_i} e^{x'-x_i} f, R_i mirrored."""
    a = np.exp(-h)
    b = np.array([0.5 * h, 0.5 * h * a])
    den = np.array([1.0, -a])
    zi = np.array([-0.5 * h * values[0]])
    left, _ = lfilter(b, den, values, zi=zi)
    zi = np.array([-0.5 * h * values[-1]])
    right_rev, _ = lfilter(b, den, values[::-1], zi=zi)
    return left, right_rev[::-1]


def exp_convolve(f: GridFunction) -> GridFunction:
    """p * f on the grid: the discrete inverse of (1 - d^2/dx^2).

    Two-pass recursion with exact decay factor e^(-h); agrees with dense
    trapezoid quadrature of the convolution to rounding.  The line is
    truncated: f is treated as 0 outside the grid, so callers should keep
    support well away from the boundaries (tail ~ e^(-distance)).
    """
    if f.grid.n_nodes == 0:
        raise ValueError("exp_convolve: empty grid")
    left, right = _exp_passes(f.values, f.h)
    return GridFunction(f.grid, 0.5 * (left + right))


def exp_convolve_dx(f: GridFunction) -> GridFunction:
    """d/dx (p * f) = p' * f, from the same two one-sided passes."""
    left, right = _exp_passes(f.values, f.h)
    return GridFunction(f.grid, 0.5 * (right - left))


# -----------------------------------------------------------------------
# mollification of grid data
# -----------------------------------------------------------------------


def mollifier_weights(n: int, h: float, shift: float = 0.0) -> tuple[np.ndarray, int]:
    """Quadrature weights of rho_n(. - shift) against the P1 hat basis.

    Returns (weights, k0) with weights[j] the mass seen by node offset
    k0 + j; the weights are non-negative and sum to 1 exactly, so discrete
    convolution with them preserves total integral and sign.
    """
    half = 1.0 / n
    xg, wg = _gauss_on(shift - half, shift + half)
    vals = mollifier(xg - shift, n) * wg
    k_lo = int(np.floor((shift - half) / h)) - 1
    k_hi = int(np.ceil((shift + half) / h)) + 1
    w = np.zeros(k_hi - k_lo + 1)
    idx = np.floor(xg / h).astype(int)
    frac = xg / h - idx
    np.add.at(w, idx - k_lo, vals * (1.0 - frac))
    np.add.at(w, idx + 1 - k_lo, vals * frac)
    w /= w.sum()
    return w, k_lo


def min_resolved_nodes(n: int, h: float) -> float:
    """Number of grid cells spanned by the mollifier support 2/n."""
    return 2.0 / (n * h)


def convolve_weights(f: GridFunction, w: np.ndarray, k0: int) -> GridFunction:
    """out[i] = sum_j w[j] * f[i - (k0 + j)], f extended by zero."""
    npts = f.grid.n_nodes
    pad = len(w) + abs(k0) + 1
    fp = np.concatenate([np.zeros(pad), f.values, np.zeros(pad)])
    full = np.convolve(fp, w)  # full[m] = sum_j w[j] fp[m - j]
    start = pad - k0
    return GridFunction(f.grid, full[start : start + npts])


def mollify(f: GridFunction, n: int, shift: float = 0.0) -> GridFunction:
    """rho_n * f evaluated at the nodes (optionally with a kernel shift).

    Sign-preserving and integral-preserving by construction.  Rejects
    under-resolved mollifiers: the support 2/n must span at least 8 cells.
    """
    if min_resolved_nodes(n, f.h) < 8.0:
        raise ResolutionError(
            f"mollifier n={n} spans {min_resolved_nodes(n, f.h):.2f} cells of "
            f"h={f.h}; need >= 8 (use n <= {int(2 / (8 * f.h))})"
        )
    w, k0 = mollifier_weights(n, f.h, shift)
    return convolve_weights(f, w, k0)


class ResolutionError(ValueError):
    """Mollifier too narrow for the grid spacing."""
