"""Analysis instruments: modulation tracking, weighted monotonicity
functionals, localization audits and convolution bounds.

Everything here evaluates stored snapshots; nothing feeds back into the
time stepper, so a run can be re-analyzed offline from its CSV artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .field import FieldState, invariants
from .grid import GridFunction, SpatialGrid, trapz
from .kernels import exp_convolve, mollify, phi_ramp, phi_ramp_prime, psi

DEFAULT_N0 = 4
KAPPA0 = 0.5
ROOT_XTOL = 1e-12  # position; keeps orthogonality residuals below 1e-10


class NoRootInWindow(RuntimeError):
    """Orthogonality root left the tracking window: outside the stable tube."""


# -----------------------------------------------------------------------
# modulation point x(t): root of  int u(x) (rho_n0 * phi')(x - s) dx = 0
# -----------------------------------------------------------------------


@lru_cache(maxsize=8)
def _orthogonality_kernel(n0: int) -> GridFunction:
    """(rho_n0 * phi') on a fine internal grid, phi = exp(-|.|)."""
    h_f = min(0.002, 1.0 / (16 * n0))
    g = SpatialGrid.regular(-25.0, 25.0, h_f)
    x = g.x
    phi_prime = -np.sign(x) * np.exp(-np.abs(x))
    return mollify(GridFunction(g, phi_prime), n0)


def _orthogonality_residual(state: FieldState, s: float, kern: GridFunction) -> float:
    shifted = kern(state.u.x - s)
    return trapz(state.u.values * shifted, state.u.h)


def validate_n0(n0: int, samples: int = 201, tol: float = 1e-6) -> bool:
    """Check that s -> int phi(.-s) (rho_n0*phi') has its only zero at s=0.

    Scans s in [-1/2, 1/2]; requires exactly one sign change, located at 0.
    """
    kern = _orthogonality_kernel(n0)
    xf = kern.x
    hf = kern.h
    ss = np.linspace(-0.5, 0.5, samples)
    vals = np.array([trapz(np.exp(-np.abs(xf - s)) * kern.values, hf) for s in ss])
    signs = np.sign(vals)
    signs[np.abs(vals) < 1e-14] = 0.0
    nz = signs[signs != 0]
    flips = np.count_nonzero(np.diff(nz) != 0)
    if flips != 1:
        return False
    k = np.where(np.diff(np.sign(vals)) != 0)[0]
    if len(k) == 0:
        return False
    root = brentq(
        lambda s: trapz(np.exp(-np.abs(xf - s)) * kern.values, hf),
        ss[k[0]], ss[k[0] + 1], xtol=1e-12)
    return abs(root) < tol


@dataclass(frozen=True)
class ModulationState:
    t: float
    x_mod: float
    lam: float            # lambda(t) = max u
    xdot_est: float       # backward-difference speed estimate
    n0: int
    residual: float


def track_modulation(state: FieldState, prev: Optional[ModulationState] = None,
                     c_ref: float = 1.0, n0: int = DEFAULT_N0,
                     kappa0: float = KAPPA0) -> ModulationState:
    """Locate the modulation point by safeguarded root finding.

    Seeds at the previous point (or argmax u on the first call) and looks
    for a sign change of the orthogonality integral within +-kappa0.
    """
    kern = _orthogonality_kernel(n0)
    x = state.u.x
    if prev is not None:
        seed = prev.x_mod
    else:
        seed = float(x[int(np.argmax(state.u.values))])

    def f(s: float) -> float:
        return _orthogonality_residual(state, s, kern)

    ss = np.linspace(seed - kappa0, seed + kappa0, 41)
    vals = np.array([f(s) for s in ss])
    # bracket nearest the seed
    flips = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(flips) == 0:
        raise NoRootInWindow(
            f"no orthogonality sign change within {kappa0} of seed {seed:.4f} "
            f"at t={state.t:g}")
    mid = (ss[flips] + ss[flips + 1]) / 2.0
    j = int(flips[np.argmin(np.abs(mid - seed))])
    root = float(brentq(f, ss[j], ss[j + 1], xtol=ROOT_XTOL))
    resid = abs(f(root))
    lam = float(np.max(state.u.values))
    if prev is not None and state.t > prev.t:
        xdot = (root - prev.x_mod) / (state.t - prev.t)
    else:
        xdot = c_ref
    return ModulationState(state.t, root, lam, xdot, n0, resid)


def modulation_track(snapshots: Sequence[FieldState], c_ref: float = 1.0,
                     n0: int = DEFAULT_N0) -> list[ModulationState]:
    out: list[ModulationState] = []
    prev = None
    for s in snapshots:
        prev = track_modulation(s, prev, c_ref=c_ref, n0=n0)
        out.append(prev)
    return out


def crest_position(u: GridFunction, negative: bool = False,
                   window: Optional[tuple[float, float]] = None) -> float:
    """Sub-cell crest locator (parabolic refinement of the arg-extremum)."""
    v = -u.values if negative else u.values
    x = u.x
    if window is not None:
        mask = (x >= window[0]) & (x <= window[1])
        idx = np.where(mask)[0]
        i = idx[int(np.argmax(v[idx]))]
    else:
        i = int(np.argmax(v))
    if i == 0 or i == len(v) - 1:
        return float(x[i])
    denom = v[i - 1] - 2.0 * v[i] + v[i + 1]
    if denom == 0.0:
        return float(x[i])
    return float(x[i] + 0.5 * (v[i - 1] - v[i + 1]) / denom * u.h)


# -----------------------------------------------------------------------
# weighted functionals
# -----------------------------------------------------------------------


def gamma_max(alpha: float, c0: float) -> float:
    """Largest admissible momentum weight for the monotonicity functional."""
    return (1.0 - alpha) * c0 / (3.0 * math.pi * (1.0 + math.exp(2.0 / 3.0)))


def weighted_energy(state: FieldState, w: np.ndarray) -> float:
    u, ux = state.u.values, state.ux.values
    return trapz((u * u + ux * ux) * w, state.u.h)


def weighted_momentum(state: FieldState, w: np.ndarray) -> float:
    return trapz(state.y.values * w, state.u.h)


@dataclass(frozen=True)
class FunctionalSample:
    t: float
    value: float
    window_center: float
    bracket_violation: float = 0.0


@dataclass
class FunctionalSeries:
    name: str
    params: dict
    samples: list[FunctionalSample]
    warnings: list[str] = dc_field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])


def functional_I(snapshots: Sequence[FieldState], t0: float, R: float,
                 gamma: float, sign: str, z_path: Callable[[float], float],
                 track: Optional[Sequence[ModulationState]] = None,
                 alpha: float = 1.0 / 3.0, beta: float = 0.25,
                 c_ref: float = 1.0) -> FunctionalSeries:
    """Windowed energy+momentum functional with the weight riding z_path.

    The window center is x(t0) -+ R + z(t) - z(t0); sign is "+R" or "-R".
    The speed bracket (1-alpha) xdot <= zdot <= (1-beta) xdot is checked by
    a three-point stencil and reported per sample as a warning level, not a
    failure (discretization jitter near equality is expected).
    """
    if sign not in ("+R", "-R"):
        raise ValueError("sign must be '+R' or '-R'")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if track is None:
        track = modulation_track(snapshots, c_ref=c_ref)
    times = np.array([s.t for s in snapshots])
    k0 = int(np.argmin(np.abs(times - t0)))
    x_t0 = track[k0].x_mod
    z_t0 = z_path(times[k0])
    offset = x_t0 + (R if sign == "+R" else -R) - z_t0
    xs_mod = np.array([m.x_mod for m in track])

    samples = []
    warnings = []
    for k, s in enumerate(snapshots):
        center = offset + z_path(s.t)
        w_psi = psi(s.u.x - center)
        val = weighted_energy(s, w_psi)
        if gamma > 0:
            val += gamma * weighted_momentum(s, phi_ramp(s.u.x - center))
        dt_probe = 1e-3
        zdot = (z_path(s.t + dt_probe) - z_path(s.t - dt_probe)) / (2 * dt_probe)
        xdot = _track_speed(times, xs_mod, k)
        viol = max(0.0, (1 - alpha) * xdot - zdot, zdot - (1 - beta) * xdot)
        if viol > 1e-6 + 0.05 * abs(xdot):
            warnings.append(
                f"speed bracket violated at t={s.t:g}: zdot={zdot:g} "
                f"xdot={xdot:g}")
        samples.append(FunctionalSample(s.t, val, center, viol))
    return FunctionalSeries(
        name=f"I{sign}", samples=samples, warnings=warnings,
        params={"t0": t0, "R": R, "gamma": gamma, "alpha": alpha, "beta": beta})


def _track_speed(times: np.ndarray, xs: np.ndarray, k: int) -> float:
    if len(times) < 2:
        return 0.0
    if k == 0:
        return (xs[1] - xs[0]) / (times[1] - times[0])
    if k == len(times) - 1:
        return (xs[-1] - xs[-2]) / (times[-1] - times[-2])
    return (xs[k + 1] - xs[k - 1]) / (times[k + 1] - times[k - 1])


def check_window_stays_right_of_marker(series: FunctionalSeries,
                                       snapshots: Sequence[FieldState],
                                       upto_t0: bool = True) -> float:
    """Margin min(center(t) - marker(t)); >= 0 means (zo1)-type condition holds."""
    t0 = series.params["t0"]
    margins = []
    for s, sample in zip(snapshots, series.samples):
        if upto_t0 and s.t > t0 + 1e-12:
            continue
        if s.x0_marker is not None:
            margins.append(sample.window_center - s.x0_marker)
    return float(min(margins)) if margins else math.inf


@dataclass(frozen=True)
class JGValues:
    jr: float
    jl: float
    go: float
    gi: float


def functional_JG(state: FieldState, center: float, R: float,
                  gamma: float) -> JGValues:
    """Right/left/outside/inside localization of E + gamma M around center."""
    x = state.u.x
    jr = weighted_energy(state, psi(x - center - R))
    jl = weighted_energy(state, 1.0 - psi(x - center + R))
    if gamma != 0.0:
        jr += gamma * weighted_momentum(state, phi_ramp(x - center - R))
        jl += gamma * weighted_momentum(state, 1.0 - phi_ramp(x - center + R))
    inv = invariants(state)
    total = inv.E + gamma * inv.M
    go = jr + jl
    return JGValues(jr, jl, go, total - go)


def lambda_z_series(snapshots: Sequence[FieldState], theta: float,
                    z: float) -> FunctionalSeries:
    """Left-cone energy: weight ~ 1 left of a line moving left at theta/2.

    Non-increasing on nonnegative-momentum runs with u >= -theta/8; rightward
    energy transport drains the window.  Vanishes as z -> -inf at t = 0.
    """
    samples = []
    warnings = []
    u_min = min(float(np.min(s.u.values)) for s in snapshots)
    if u_min < -theta / 8.0:
        warnings.append(
            f"precondition u >= -theta/8 violated: min u = {u_min:g}")
    for s in snapshots:
        w = psi(z - 0.5 * theta * s.t - s.u.x)
        samples.append(FunctionalSample(s.t, weighted_energy(s, w), z))
    series = FunctionalSeries("lambda_z", {"theta": theta, "z": z},
                              samples, warnings)
    return series


def max_upward_increment(series: FunctionalSeries) -> float:
    v = series.values
    return float(np.max(np.diff(v), initial=0.0))


# -----------------------------------------------------------------------
# level tracker x_gamma and left-mass audits
# -----------------------------------------------------------------------


def _right_energy(state: FieldState, z: float) -> float:
    return weighted_energy(state, phi_ramp(state.u.x - z))


def x_gamma_of(state: FieldState, gamma: float) -> float:
    """Solve int (u^2+u_x^2) Phi(. - x_gamma) = gamma (monotone bisection)."""
    E = invariants(state).E
    if not 0.0 < gamma < E:
        raise ValueError(f"gamma must lie in (0, E)=(0, {E:g}), got {gamma}")
    lo = state.grid.x_min - 3.0
    hi = state.grid.x_max
    return float(brentq(lambda zz: _right_energy(state, zz) - gamma, lo, hi,
                        xtol=ROOT_XTOL))


@dataclass
class LevelTrack:
    times: np.ndarray
    x_gamma: np.ndarray
    gamma: float

    def max_decrease(self) -> float:
        return float(max(np.max(-np.diff(self.x_gamma), initial=0.0), 0.0))


def x_gamma_track(snapshots: Sequence[FieldState], gamma: float) -> LevelTrack:
    xs = np.array([x_gamma_of(s, gamma) for s in snapshots])
    return LevelTrack(np.array([s.t for s in snapshots]), xs, gamma)


def x_gamma_speed_bound_residuals(snapshots: Sequence[FieldState],
                                  track: LevelTrack) -> np.ndarray:
    """xdot_gamma - (1/2) sqrt(int u^2 Phi'(. - x_gamma)) at interior samples."""
    t = track.times
    res = []
    for k in range(1, len(t) - 1):
        xdot = (track.x_gamma[k + 1] - track.x_gamma[k - 1]) / (t[k + 1] - t[k - 1])
        s = snapshots[k]
        rhs_val = 0.5 * math.sqrt(max(
            trapz(s.u.values**2 * phi_ramp_prime(s.u.x - track.x_gamma[k]),
                  s.u.h), 0.0))
        res.append(xdot - rhs_val)
    return np.array(res)


@dataclass
class AuditSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    fitted_rate: Optional[float] = None


def fit_exponential_rate(times: np.ndarray, values: np.ndarray,
                         floor: float = 0.0) -> Optional[float]:
    """Least-squares decay rate r of v ~ C e^{-r t} over samples above floor."""
    mask = values > max(floor, 0.0)
    if np.count_nonzero(mask) < 3:
        return None
    tt, vv = times[mask], np.log(values[mask])
    A = np.vstack([tt, np.ones_like(tt)]).T
    slope, _ = np.linalg.lstsq(A, vv, rcond=None)[0]
    return float(-slope)


def left_mass_audit(snapshots: Sequence[FieldState], window: str,
                    z: float = 0.0, rate: float = 1.0 / 96.0,
                    buffer: float = math.log(2.0),
                    track: Optional[Sequence[ModulationState]] = None,
                    audit_n: Optional[int] = None,
                    fit_floor_frac: float = 1e-3) -> AuditSeries:
    """Momentum/energy decay audits behind a fixed or moving reference point.

    window: "fixed_point"  -> ||u||^2_{H1(-inf, z)}
            "moving_ln2"   -> |int y over [marker - ln 2, marker]|
            "growing"      -> int y^- over (x_mod - buffer - rate*(t - t_0), inf)

    The growing window keeps a ln 2 buffer behind the tracked crest so it
    contains the left-shoulder momentum from t = 0 on; with audit_n set, y is
    tested against width-1/audit_n bumps first (weak-sense measurement).
    """
    times = np.array([s.t for s in snapshots])
    vals = np.empty(len(snapshots))

    def y_of(s: FieldState):
        return mollify(s.y, audit_n).values if audit_n else s.y.values

    if window == "fixed_point":
        for k, s in enumerate(snapshots):
            m = s.u.x < z
            vals[k] = trapz(np.where(m, s.u.values**2 + s.ux.values**2, 0.0),
                            s.u.h)
    elif window == "moving_ln2":
        ln2 = math.log(2.0)
        for k, s in enumerate(snapshots):
            if s.x0_marker is None:
                raise ValueError("moving_ln2 audit needs x0_marker on snapshots")
            x = s.u.x
            m = (x >= s.x0_marker - ln2) & (x <= s.x0_marker)
            vals[k] = abs(trapz(np.where(m, y_of(s), 0.0), s.u.h))
    elif window == "growing":
        if track is None:
            track = modulation_track(snapshots)
        t_start = times[0]
        for k, s in enumerate(snapshots):
            edge = track[k].x_mod - buffer - rate * (s.t - t_start)
            m = s.u.x > edge
            vals[k] = trapz(np.where(m, np.maximum(-y_of(s), 0.0), 0.0),
                            s.u.h)
    else:
        raise ValueError(f"unknown audit window {window!r}")
    floor = fit_floor_frac * max(float(np.max(vals)), 1e-300)
    return AuditSeries(window, times, vals,
                       fit_exponential_rate(times, vals, floor))


# -----------------------------------------------------------------------
# pointwise convolution lower bound: p*(u^2 + u_x^2/2) >= u^2/2
# -----------------------------------------------------------------------


@dataclass(frozen=True)
class ConvolutionBoundReport:
    min_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_residual >= -self.tolerance


def convolution_lower_bound_check(u: GridFunction,
                                  tolerance: float = 1e-8) -> ConvolutionBoundReport:
    ux = np.gradient(u.values, u.h, edge_order=2)
    conv = exp_convolve(GridFunction(u.grid, u.values**2 + 0.5 * ux * ux))
    resid = conv.values - 0.5 * u.values**2
    return ConvolutionBoundReport(float(np.min(resid)), tolerance)


# -----------------------------------------------------------------------
# flux identities for fixed weights (centered time difference vs RHS)
# -----------------------------------------------------------------------


def _centered_dfdt(tm: float, t0: float, tp: float,
                   fm: float, f0: float, fp: float) -> float:
    d1, d2 = t0 - tm, tp - t0
    return (d1 * d1 * fp + (d2 * d2 - d1 * d1) * f0 - d2 * d2 * fm) / (
        d1 * d2 * (d1 + d2))


def flux_residual_energy(snap_m: FieldState, snap_0: FieldState,
                         snap_p: FieldState, w: np.ndarray,
                         wp: np.ndarray) -> tuple[float, float]:
    """(centered d/dt of int (u^2+u_x^2) g, instantaneous RHS at the middle).

    RHS: int u u_x^2 g' + 2 int u h g' with h = p*(u^2 + u_x^2/2).
    """
    f = [weighted_energy(s, w) for s in (snap_m, snap_0, snap_p)]
    dfdt = _centered_dfdt(snap_m.t, snap_0.t, snap_p.t, *f)
    s = snap_0
    u, ux = s.u.values, s.ux.values
    hconv = exp_convolve(GridFunction(s.grid, u * u + 0.5 * ux * ux)).values
    rhs_val = trapz(u * ux * ux * wp, s.u.h) + 2.0 * trapz(u * hconv * wp, s.u.h)
    return dfdt, rhs_val


def flux_residual_momentum(snap_m: FieldState, snap_0: FieldState,
                           snap_p: FieldState, w: np.ndarray,
                           wp: np.ndarray) -> tuple[float, float]:
    """(centered d/dt of int y g, RHS = int y u g' + 1/2 int (u^2-u_x^2) g')."""
    f = [weighted_momentum(s, w) for s in (snap_m, snap_0, snap_p)]
    dfdt = _centered_dfdt(snap_m.t, snap_0.t, snap_p.t, *f)
    s = snap_0
    u, ux, y = s.u.values, s.ux.values, s.y.values
    rhs_val = (trapz(y * u * wp, s.u.h)
               + 0.5 * trapz((u * u - ux * ux) * wp, s.u.h))
    return dfdt, rhs_val


def remark_lower_bound_margin(state: FieldState, center: float,
                              gamma: float) -> float:
    """Margin of I >= (1/(9 pi)) <u^2+u_x^2+y, Phi(.-center)> (>=0 passes)."""
    x = state.u.x
    ival = weighted_energy(state, psi(x - center))
    ival += gamma * weighted_momentum(state, phi_ramp(x - center))
    w = phi_ramp(x - center)
    rhs_val = (weighted_energy(state, w) + weighted_momentum(state, w)) / (9 * math.pi)
    return ival - rhs_val
