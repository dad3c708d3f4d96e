"""Render the experiment CSV outputs into figures.

Consumes only the documented CSV schemas of the simulation CLI:

- ``ks_by_n.csv``: columns ``n, ks_statistic``
- ``exit_probs.csv``: columns ``n, mc, analytic_prelimit, analytic_limit, std_err``
- ``occupation.csv``: columns ``n, epsilon, mc, bvp, std_err``
- sample sets: ``#``-comment metadata lines, then ``index,value`` rows

Figure kinds: ks_convergence, ecdf_overlay, exit_bars, occupation_curve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaError", "render", "KINDS"]

KINDS = ("ks_convergence", "ecdf_overlay", "exit_bars", "occupation_curve")


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[Path]
    output: Path
    title: str | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def _read_table(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column '{col}'")
    data = {col: [] for col in header}
    for row in rows[1:]:
        if len(row) != len(header):
            raise SchemaError(f"{path}: row with {len(row)} fields, expected {len(header)}")
        for col, cell in zip(header, row):
            data[col].append(float(cell))
    if not rows[1:]:
        raise SchemaError(f"{path}: no data rows")
    return {col: np.asarray(vals) for col, vals in data.items()}


def _read_sample_set(path: Path) -> tuple[np.ndarray, dict]:
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    meta = {}
    values = []
    header_seen = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val
                continue
            if not header_seen:
                cols = [c.strip() for c in line.split(",")]
                if "value" not in cols:
                    raise SchemaError(f"{path}: missing column 'value'")
                header_seen = True
                continue
            parts = line.split(",")
            values.append(float(parts[-1]))
    if not header_seen:
        raise SchemaError(f"{path}: missing column 'value'")
    if not values:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(values), meta


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=130)
    if title:
        ax.set_title(title)
    return fig, ax


def _finish(fig, ax, output):
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output)
    plt.close(fig)


def _ks_convergence(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("ks_convergence expects exactly one input CSV")
    table = _read_table(spec.inputs[0], ("n", "ks_statistic"))
    fig, ax = _new_axes(spec.title or "Marginal KS distance vs scaling index")
    ax.plot(table["n"], table["ks_statistic"], marker="o")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("two-sample KS statistic")
    ax.set_ylim(bottom=0.0)
    _finish(fig, ax, spec.output)


def _ecdf_overlay(spec: FigureSpec):
    if len(spec.inputs) < 2:
        raise SchemaError("ecdf_overlay expects at least two sample CSVs")
    fig, ax = _new_axes(spec.title or "Empirical CDF overlay")
    for i, path in enumerate(spec.inputs):
        values, meta = _read_sample_set(path)
        xs = np.sort(values)
        ys = np.arange(1, xs.size + 1) / xs.size
        if i < len(spec.labels):
            label = spec.labels[i]
        elif "n" in meta:
            label = f"prelimit n={meta['n']}"
        else:
            label = path.stem
        ax.step(xs, ys, where="post", label=label)
    ax.set_xlabel("value at the comparison time")
    ax.set_ylabel("empirical CDF")
    ax.legend()
    _finish(fig, ax, spec.output)


def _exit_bars(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("exit_bars expects exactly one input CSV")
    table = _read_table(spec.inputs[0],
                        ("n", "mc", "analytic_prelimit", "analytic_limit", "std_err"))
    fig, ax = _new_axes(spec.title or "Exit probabilities through the upper boundary")
    idx = np.arange(table["n"].size)
    width = 0.27
    ax.bar(idx - width, table["mc"], width, yerr=3 * table["std_err"],
           capsize=3, label="Monte Carlo")
    ax.bar(idx, table["analytic_prelimit"], width, label="scale formula (finite n)")
    ax.bar(idx + width, table["analytic_limit"], width, label="limit process")
    ax.set_xticks(idx)
    ax.set_xticklabels([f"n={v:g}" for v in table["n"]])
    ax.set_ylabel("P(exit through +alpha)")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    _finish(fig, ax, spec.output)


def _occupation_curve(spec: FigureSpec):
    if len(spec.inputs) != 1:
        raise SchemaError("occupation_curve expects exactly one input CSV")
    table = _read_table(spec.inputs[0], ("n", "epsilon", "mc", "bvp", "std_err"))
    fig, ax = _new_axes(spec.title or "Occupation time near the origin before exit")
    for n in sorted(set(table["n"])):
        sel = table["n"] == n
        order = np.argsort(table["epsilon"][sel])
        eps = table["epsilon"][sel][order]
        ax.errorbar(eps, table["mc"][sel][order], yerr=3 * table["std_err"][sel][order],
                    marker="o", linestyle="none", capsize=3, label=f"MC, n={n:g}")
        ax.plot(eps, table["bvp"][sel][order], linestyle="--", label=f"BVP, n={n:g}")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("expected time in [-eps, eps]")
    ax.legend(fontsize=8)
    _finish(fig, ax, spec.output)


_RENDERERS = {
    "ks_convergence": _ks_convergence,
    "ecdf_overlay": _ecdf_overlay,
    "exit_bars": _exit_bars,
    "occupation_curve": _occupation_curve,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return spec.output
