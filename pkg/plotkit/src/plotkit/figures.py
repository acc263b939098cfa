"""Render experiment CSVs into publication-style figures.

Three figure kinds are supported: the opportunity-risk tradeoff scatter with
bound-line overlays, the bound-envelope curves against the trust level for
several discounts, and the per-type payoff panels with error bars. All
numbers come straight from the CSV rows; nothing is recomputed or aggregated
here, so every plotted point corresponds to exactly one input row.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("tradeoff-scatter", "bound-curves", "payoff-per-type")

# Deterministic rendering: fixed fonts and sizes, salted svg ids, no
# autolayout surprises.
RC = {
    "figure.figsize": (6.4, 4.8),
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotkit",
}


class MissingColumnsError(ValueError):
    """An input CSV lacks columns the figure kind needs; names the gaps."""


@dataclass(frozen=True)
class FigureSpec:
    """One render job: input CSVs, the figure kind, optional style overrides
    and the output image path."""

    inputs: Tuple[str, ...]
    kind: str
    out: str
    style: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_csv(path) -> Tuple[List[Dict[str, object]], Dict[str, str]]:
    """Rows plus the `# meta:` header block. Numeric fields are floated,
    empty cells become None, everything else stays a string."""
    meta: Dict[str, str] = {}
    lines = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# meta:"):
                body = line[len("# meta:"):].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
            elif line.strip():
                lines.append(line)
    if not lines:
        raise ValueError(f"{path}: empty CSV (no header row)")
    rows = []
    for raw in csv.DictReader(lines):
        row: Dict[str, object] = {}
        for k, v in raw.items():
            if v is None or v == "":
                row[k] = None
                continue
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows, meta


def _require(rows: Sequence[Dict[str, object]], needed: Sequence[str], path) -> None:
    missing = [c for c in needed if c not in rows[0]]
    if missing:
        raise MissingColumnsError(f"{path}: missing columns {missing}")


def _col(rows: Sequence[Dict[str, object]], name: str) -> np.ndarray:
    return np.array([r[name] for r in rows], dtype=float)


def _label(path, meta: Dict[str, str]) -> str:
    return meta.get("game", os.path.splitext(os.path.basename(os.fspath(path)))[0])


def _tradeoff_scatter(ax, spec: FigureSpec) -> None:
    for path in spec.inputs:
        rows, meta = read_csv(path)
        _require(rows, ["exact_opportunity", "exact_risk"], path)
        name = _label(path, meta)
        ax.scatter(
            _col(rows, "exact_opportunity"),
            _col(rows, "exact_risk"),
            s=28,
            zorder=3,
            label=f"{name} exact",
        )
        if "opportunity_mean" in rows[0] and "risk_mean" in rows[0]:
            ax.errorbar(
                _col(rows, "opportunity_mean"),
                _col(rows, "risk_mean"),
                xerr=_col(rows, "opportunity_ci"),
                yerr=_col(rows, "risk_ci"),
                fmt="x",
                ms=5,
                lw=1,
                alpha=0.8,
                zorder=2,
                label=f"{name} sampled",
            )
        if "upper_opportunity" in rows[0] and "upper_risk" in rows[0]:
            ax.plot(
                _col(rows, "upper_opportunity"),
                _col(rows, "upper_risk"),
                "-",
                lw=1.2,
                zorder=1,
                label=f"{name} achievable bound",
            )
        if rows[0].get("lower_risk") is not None:
            ax.plot(
                _col(rows, "upper_opportunity"),
                _col(rows, "lower_risk"),
                "--",
                lw=1.2,
                zorder=1,
                label=f"{name} risk floor",
            )
    ax.set_xlabel("(missed) opportunity")
    ax.set_ylabel("risk")
    ax.set_title("opportunity-risk tradeoff")
    ax.legend(loc="best")


def _bound_curves(fig, spec: FigureSpec) -> None:
    ax_opp, ax_risk = fig.subplots(1, 2)
    for path in spec.inputs:
        rows, _ = read_csv(path)
        _require(rows, ["gamma", "lambda", "upper_opp", "upper_risk", "lower_opp", "lower_risk"], path)
        gammas = sorted({r["gamma"] for r in rows})
        for g in gammas:
            grp = [r for r in rows if r["gamma"] == g]
            grp.sort(key=lambda r: r["lambda"])
            lam = _col(grp, "lambda")
            ax_opp.plot(lam, _col(grp, "upper_opp"), "-", label=f"upper, discount {g:g}")
            ax_opp.plot(lam, _col(grp, "lower_opp"), "--", label=f"lower, discount {g:g}")
            ax_risk.plot(lam, _col(grp, "upper_risk"), "-", label=f"upper, discount {g:g}")
            ax_risk.plot(lam, _col(grp, "lower_risk"), "--", label=f"lower, discount {g:g}")
    ax_opp.set_xlabel("trust level")
    ax_opp.set_ylabel("opportunity bound")
    ax_risk.set_xlabel("trust level")
    ax_risk.set_ylabel("risk bound")
    ax_opp.legend(loc="best")
    ax_risk.legend(loc="best")
    fig.suptitle("bound envelopes")


def _payoff_per_type(ax, spec: FigureSpec) -> None:
    for path in spec.inputs:
        rows, _ = read_csv(path)
        _require(rows, ["lambda", "type", "payoff_mean", "payoff_ci"], path)
        types = sorted({r["type"] for r in rows})
        for t in types:
            grp = sorted((r for r in rows if r["type"] == t), key=lambda r: r["lambda"])
            ax.errorbar(
                _col(grp, "lambda"),
                _col(grp, "payoff_mean"),
                yerr=_col(grp, "payoff_ci"),
                marker="o",
                ms=4,
                lw=1.2,
                capsize=2,
                label=str(t),
            )
    ax.set_xlabel("trust level")
    ax.set_ylabel("average discounted payoff")
    ax.set_title("payoff per opponent type")
    ax.legend(loc="best", ncols=2)


def build_figure(spec: FigureSpec):
    """The figure object for a spec; render() saves it. Exposed so tests can
    read the plotted arrays back."""
    with plt.rc_context({**RC, **spec.style}):
        if spec.kind == "bound-curves":
            fig = plt.figure(figsize=(9.6, 4.2))
            _bound_curves(fig, spec)
        else:
            fig, ax = plt.subplots()
            if spec.kind == "tradeoff-scatter":
                _tradeoff_scatter(ax, spec)
            else:
                _payoff_per_type(ax, spec)
        fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Render the spec to its output image (png or svg) and return the path.
    Inputs are opened read-only; identical inputs produce identical files."""
    fig = build_figure(spec)
    ext = os.path.splitext(spec.out)[1].lower()
    if ext not in (".png", ".svg"):
        raise ValueError(f"output must be .png or .svg, got {spec.out!r}")
    metadata = {"Date": None} if ext == ".svg" else {"Software": "plotkit"}
    try:
        # svg ids are salted at save time, so the rc context must cover it
        with plt.rc_context({**RC, **spec.style}):
            fig.savefig(spec.out, metadata=metadata)
    finally:
        plt.close(fig)
    return os.fspath(spec.out)
