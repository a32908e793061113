"""The four figure kinds rendered from run artifacts.

waterfall          u(t, x) snapshot stack with vertical time offsets
functional_series  diagnostic time series with max-increment annotation
trajectory_fan     particle paths with predicted-speed asymptotes overlaid
rate_fit           semilog decay series with fitted exponential envelope
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .io import (SchemaError, read_diagnostics, read_prediction,
                 read_snapshots, read_trajectory)

KINDS = ("waterfall", "functional_series", "trajectory_fan", "rate_fit")


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file required")

    @staticmethod
    def from_dict(d: dict) -> "FigureSpec":
        return FigureSpec(kind=d["kind"], inputs=list(d["inputs"]),
                          output=d["output"], style=d.get("style", {}))


def _new_figure(style: dict):
    # pinned salt and no date metadata keep re-renders byte-identical
    plt.rcParams["svg.hashsalt"] = "plotkit"
    figsize = style.get("figsize", (7.0, 4.5))
    return plt.subplots(figsize=figsize, dpi=style.get("dpi", 120))


def _save(fig, output: str) -> Path:
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if out.suffix == ".svg" else {}
    fig.savefig(out, metadata=meta)
    plt.close(fig)
    return out


def render(spec: FigureSpec) -> Path:
    """Render one figure file; read-only over the run artifacts."""
    renderer = {
        "waterfall": _render_waterfall,
        "functional_series": _render_functional_series,
        "trajectory_fan": _render_trajectory_fan,
        "rate_fit": _render_rate_fit,
    }[spec.kind]
    return renderer(spec)


def _render_waterfall(spec: FigureSpec) -> Path:
    blocks = read_snapshots(spec.inputs[0])
    style = spec.style
    stride = max(1, len(blocks) // int(style.get("max_traces", 24)))
    blocks = blocks[::stride]
    gain = float(style.get("offset_gain", 1.0))
    umax = max(float(np.max(np.abs(b.u))) for b in blocks) or 1.0
    dt = blocks[-1].t - blocks[0].t or 1.0
    offset_per_t = gain * 1.2 * umax * len(blocks) / dt / max(len(blocks), 1)

    fig, ax = _new_figure(style)
    for b in blocks:
        ax.plot(b.x, b.u + offset_per_t * b.t, color="steelblue", lw=0.9)
    ax.set_xlabel("x")
    ax.set_ylabel("u + offset(t)")
    ax.set_title(style.get("title", "snapshot waterfall"))
    return _save(fig, spec.output)


def _render_functional_series(spec: FigureSpec) -> Path:
    series = read_diagnostics(spec.inputs[0])
    style = spec.style
    name = style.get("functional")
    if name is not None:
        series = [s for s in series if s.functional == name]
        if not series:
            raise SchemaError(f"{spec.inputs[0]}: no series for functional "
                              f"{name!r}")
    fig, ax = _new_figure(style)
    worst = -np.inf
    for s in series:
        label = s.functional
        if s.params:
            label += " " + ",".join(f"{k}={v}" for k, v in
                                    sorted(s.params.items()))
        ax.plot(s.t, s.value, lw=1.2, label=label)
        if len(s.value) > 1:
            worst = max(worst, float(np.max(np.diff(s.value))))
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(style.get("title", "functional time series"))
    if np.isfinite(worst):
        ax.annotate(f"max upward increment: {worst:.3e}",
                    xy=(0.02, 0.02), xycoords="axes fraction", fontsize=8)
    ax.legend(fontsize=7)
    return _save(fig, spec.output)


def _render_trajectory_fan(spec: FigureSpec) -> Path:
    """Particle paths q_i(t); dashed lines carry the predicted speeds."""
    traj = read_trajectory(spec.inputs[0])
    lambdas = None
    if len(spec.inputs) > 1:
        lambdas = np.sort(read_prediction(spec.inputs[1]))
    style = spec.style
    fig, ax = _new_figure(style)
    n = traj.q.shape[1]
    colors = plt.cm.viridis(np.linspace(0.1, 0.9, n))
    for i in range(n):
        ax.plot(traj.t, traj.q[:, i], color=colors[i], lw=1.4,
                label=f"q_{i + 1}")
    if lambdas is not None:
        # anchor each asymptote at the matching terminal position
        order = np.argsort(traj.q[-1])
        t_end = traj.t[-1]
        for lam, i in zip(lambdas, order):
            q_end = traj.q[-1, i]
            ax.plot(traj.t, q_end + lam * (traj.t - t_end), color="k",
                    ls="--", lw=0.9,
                    label=f"asymptote {lam:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("position")
    ax.set_title(style.get("title", "trajectory fan"))
    ax.legend(fontsize=7)
    return _save(fig, spec.output)


def _render_rate_fit(spec: FigureSpec) -> Path:
    """Semilog decay plot with a least-squares exponential envelope."""
    series = read_diagnostics(spec.inputs[0])
    style = spec.style
    name = style.get("functional")
    if name is not None:
        series = [s for s in series if s.functional == name]
    if not series:
        raise SchemaError(f"{spec.inputs[0]}: no series to fit")
    s = series[0]
    floor = float(style.get("fit_floor_frac", 1e-3)) * float(np.max(s.value))
    mask = s.value > floor
    fig, ax = _new_figure(style)
    ax.semilogy(s.t, np.maximum(s.value, 1e-300), ".-", lw=1.0, ms=3,
                label=s.functional)
    rate = None
    if np.count_nonzero(mask) >= 3:
        A = np.vstack([s.t[mask], np.ones(mask.sum())]).T
        slope, icpt = np.linalg.lstsq(A, np.log(s.value[mask]), rcond=None)[0]
        rate = -slope
        ax.semilogy(s.t[mask], np.exp(icpt + slope * s.t[mask]), "k--",
                    lw=1.0, label=f"fit rate {rate:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(style.get("title", "decay rate fit"))
    ax.legend(fontsize=7)
    return _save(fig, spec.output)
