"""Exact N-(anti)peakon dynamics and the asymptotic-speed predictor.

The ensemble (p_i, q_i) follows the canonical equations of
H(p, q) = (1/2) sum_ij p_i p_j exp(-|q_i - q_j|):

    dq_i/dt = sum_j p_j exp(-|q_i - q_j|)            (= u(q_i))
    dp_i/dt = p_i sum_j p_j sgn(q_i - q_j) exp(-|q_i - q_j|)

with sgn(0) = 0.  Amplitude-position crossings (antipeakon-peakon
collisions) are outside the modeled regime and raise ``CollisionImminent``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .grid import GridFunction, SpatialGrid


class CollisionImminent(RuntimeError):
    """Peakon positions would cross within the step at any admissible dt."""


class RealityViolation(RuntimeError):
    """Predicted-speed matrix produced eigenvalues with large imaginary part."""


@dataclass(frozen=True)
class PeakonEnsemble:
    """Amplitudes p and strictly increasing positions q at time t."""

    p: np.ndarray = dc_field(repr=False)
    q: np.ndarray = dc_field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if p.shape != q.shape or p.ndim != 1 or p.size == 0:
            raise ValueError("p and q must be 1-D arrays of equal nonzero length")
        if np.any(np.diff(q) <= 0):
            raise ValueError(f"positions must be strictly increasing, got {q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.p.size

    def is_well_ordered(self) -> bool:
        """All antipeakons left of all peakons (sign-split ordering at particle level)."""
        neg = np.where(self.p < 0)[0]
        pos = np.where(self.p > 0)[0]
        if neg.size and pos.size and neg.max() > pos.min():
            return False
        return True


def hamiltonian(e: PeakonEnsemble) -> float:
    w = np.exp(-np.abs(e.q[:, None] - e.q[None, :]))
    return 0.5 * float(e.p @ w @ e.p)


def ensemble_invariants(e: PeakonEnsemble) -> dict:
    # E = <y, u> = 2 sum_ij p_i p_j e^{-|q_i-q_j|} = 4 H
    H = hamiltonian(e)
    return {"H": H, "E": 4.0 * H, "M": 2.0 * float(np.sum(e.p))}


def ensemble_field(e: PeakonEnsemble, grid: SpatialGrid) -> GridFunction:
    """u(x) = sum_i p_i exp(-|x - q_i|) at the grid nodes."""
    vals = np.zeros(grid.n_nodes)
    x = grid.x
    for pi, qi in zip(e.p, e.q):
        vals += pi * np.exp(-np.abs(x - qi))
    return GridFunction(grid, vals)


def ensemble_atoms(e: PeakonEnsemble) -> list[tuple[float, float]]:
    """Momentum atoms (2 p_i, q_i) of the superposition."""
    return [(2.0 * pi, qi) for pi, qi in zip(e.p, e.q)]


def ensemble_rhs(e: PeakonEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Canonical right-hand side (dp, dq) of the peakon Hamiltonian system."""
    dq_mat = e.q[:, None] - e.q[None, :]
    if np.any((dq_mat == 0) & ~np.eye(e.n, dtype=bool)):
        raise ValueError("coincident positions")
    w = np.exp(-np.abs(dq_mat))
    dq = w @ e.p
    dp = e.p * ((np.sign(dq_mat) * w) @ e.p)
    return dp, dq


_RK4 = ((0.5, 1), (0.5, 2), (1.0, 2), (None, 1))


def _rk4_flow(p: np.ndarray, q: np.ndarray, dt: float):
    def f(pv, qv):
        d = qv[:, None] - qv[None, :]
        w = np.exp(-np.abs(d))
        return pv * ((np.sign(d) * w) @ pv), w @ pv

    k1p, k1q = f(p, q)
    k2p, k2q = f(p + 0.5 * dt * k1p, q + 0.5 * dt * k1q)
    k3p, k3q = f(p + 0.5 * dt * k2p, q + 0.5 * dt * k2q)
    k4p, k4q = f(p + dt * k3p, q + dt * k3q)
    pn = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    qn = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    return pn, qn


MAX_HALVINGS = 40
STEP_H_RTOL = 1e-8


def _h_of(p: np.ndarray, q: np.ndarray) -> float:
    w = np.exp(-np.abs(q[:, None] - q[None, :]))
    return 0.5 * float(p @ w @ p)


def ensemble_step(e: PeakonEnsemble, dt: float) -> PeakonEnsemble:
    """One adaptive RK4 step; halves dt (up to 40 times) on trouble.

    A sub-step is rejected when it loses the position ordering or moves the
    Hamiltonian by more than a per-step tolerance; near an antipeakon-peakon
    collision the rejection cascade bottoms out and ``CollisionImminent`` is
    raised.  Negative dt integrates backwards (time-reversal checks).
    """
    if dt == 0.0:
        raise ValueError("dt must be nonzero")
    remaining = dt
    p, q, t = e.p, e.q, e.t
    sub = dt
    min_sub = abs(dt) * 2.0 ** (-MAX_HALVINGS)
    while remaining != 0.0:
        if abs(sub) > abs(remaining):
            sub = remaining
        if abs(sub) < min_sub:
            raise CollisionImminent(
                f"admissible step collapsed below dt/2^{MAX_HALVINGS} "
                f"near t={t}")
        h_before = _h_of(p, q)
        halvings = 0
        while True:
            pn, qn = _rk4_flow(p, q, sub)
            ok = (np.all(np.diff(qn) > 0) and np.all(np.isfinite(pn))
                  and abs(_h_of(pn, qn) - h_before)
                  <= STEP_H_RTOL * (abs(h_before) + 1.0))
            if ok:
                break
            halvings += 1
            if halvings > MAX_HALVINGS:
                raise CollisionImminent(
                    f"no admissible step near t={t}: ordering or energy lost "
                    f"down to dt={sub}")
            sub *= 0.5
        p, q, t = pn, qn, t + sub
        remaining -= sub
        if halvings == 0 and abs(sub) < abs(dt):
            sub *= 2.0
    return PeakonEnsemble(p, q, t)


@dataclass
class Trajectory:
    times: np.ndarray
    p: np.ndarray  # (n_samples, N)
    q: np.ndarray  # (n_samples, N)

    def hamiltonians(self) -> np.ndarray:
        return np.array([hamiltonian(PeakonEnsemble(pi, qi))
                         for pi, qi in zip(self.p, self.q)])

    def write_csv(self, fh) -> None:
        n = self.p.shape[1]
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"p_{i+1}" for i in range(n)]
                        + [f"q_{i+1}" for i in range(n)] + ["H", "E", "M"])
        for t, pr, qr in zip(self.times, self.p, self.q):
            H = hamiltonian(PeakonEnsemble(pr, qr))
            row = [t, *pr, *qr, H, 2.0 * H, 2.0 * float(np.sum(pr))]
            writer.writerow([f"{v:.17g}" for v in row])


def integrate_ensemble(e: PeakonEnsemble, t_end: float, dt: float,
                       sample_every: int = 1,
                       callback: Optional[Callable] = None) -> Trajectory:
    """Integrate to t_end with fixed nominal dt, sampling every k-th step."""
    times = [e.t]
    ps = [e.p.copy()]
    qs = [e.q.copy()]
    k = 0
    while e.t < t_end - 1e-12:
        step = min(dt, t_end - e.t)
        e = ensemble_step(e, step)
        k += 1
        if k % sample_every == 0 or e.t >= t_end - 1e-12:
            times.append(e.t)
            ps.append(e.p.copy())
            qs.append(e.q.copy())
            if callback is not None:
                callback(e)
    return Trajectory(np.array(times), np.array(ps), np.array(qs))


@dataclass(frozen=True)
class SpeedPrediction:
    """Sorted eigenvalues of (p_j e^{-|q_i - q_j|/2}): terminal crest speeds."""

    lambdas: np.ndarray
    matrix_residual: float

    def as_dict(self) -> dict:
        return {"lambdas": list(map(float, self.lambdas)),
                "matrix_residual": self.matrix_residual}


REALITY_RTOL = 1e-8


def predict_speeds(e: PeakonEnsemble) -> SpeedPrediction:
    """Eigenvalues of A_ij = p_j exp(-|q_i - q_j|/2), sorted ascending."""
    w = np.exp(-0.5 * np.abs(e.q[:, None] - e.q[None, :]))
    A = w * e.p[None, :]
    lam = np.linalg.eigvals(A)
    resid = float(np.max(np.abs(lam.imag)))
    scale = float(np.linalg.norm(A, 2))
    if resid > REALITY_RTOL * max(scale, 1e-300):
        raise RealityViolation(
            f"max |Im lambda| = {resid:g} exceeds {REALITY_RTOL:g} * ||A|| = "
            f"{REALITY_RTOL * scale:g}")
    return SpeedPrediction(np.sort(lam.real), resid)
