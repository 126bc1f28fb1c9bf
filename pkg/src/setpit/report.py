"""Benchmark tables and the figures rendered next to them."""

from __future__ import annotations

import csv
import io
import math
import random
import time
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .algebra import DEFAULT_PRIME  # noqa: E402
from .corpus import family  # noqa: E402
from .formula import Blackbox, DiagonalCircuit, DualRepresentation, SetDepthFormula  # noqa: E402
from .hitgen import hitting_set, hitting_set_diagonal, hitting_set_dual, size_bound, test_blackbox  # noqa: E402

BENCH_FIELDS = ("family", "instance", "zero_built", "n", "k", "d", "route", "ell", "size", "bound", "verdict", "seconds")
SWEEP_FIELDS = ("n", "k", "d", "H", "ell0", "log2_grid", "size", "bound", "log2_bound")


def hitting_set_for(c, p: int = DEFAULT_PRIME):
    """The generator matching the circuit's kind."""
    if isinstance(c, SetDepthFormula):
        return hitting_set(c.params, p)
    if isinstance(c, DiagonalCircuit):
        return hitting_set_diagonal(max(c.k, 1), c.n, c.power, p, circuit=c)
    if isinstance(c, DualRepresentation):
        return hitting_set_dual(c, p)
    raise TypeError(f"no hitting set for {type(c).__name__}")


def _shape(c) -> tuple[int, int, int]:
    if isinstance(c, SetDepthFormula):
        prm = c.params
        return prm.n, prm.k, prm.d
    if isinstance(c, DiagonalCircuit):
        return c.n, c.k, c.power
    return c.n, c.k, c.degree


def bench(fam: str, count: int, seed: int = 0, p: int = DEFAULT_PRIME, zero_every: int = 5) -> list[dict]:
    """Build, test and time `count` instances; every `zero_every`-th one is built to vanish.

    All columns except `seconds` are deterministic in (fam, count, seed, p).
    """
    rng = random.Random(seed)
    rows = []
    for i in range(count):
        zero = zero_every > 0 and i % zero_every == zero_every - 1
        c = family(fam, rng, zero=zero)
        t0 = time.perf_counter()
        hs = hitting_set_for(c, p)
        v = test_blackbox(Blackbox.of(c, p), hs, p)
        n, k, d = _shape(c)
        prov = hs.provenance
        rows.append(
            {
                "family": fam,
                "instance": i,
                "zero_built": zero,
                "n": n,
                "k": k,
                "d": d,
                "route": prov.get("route", ""),
                "ell": prov.get("ell0", prov.get("ell", prov.get("subset_size", ""))),
                "size": len(hs),
                "bound": hs.bound,
                "verdict": "zero" if v.zero else "nonzero",
                "seconds": round(time.perf_counter() - t0, 4),
            }
        )
    return rows


def size_sweep(params_list: Sequence) -> list[dict]:
    """Size accounting per class: emitted size, closed-form bound and the grid exponent."""
    rows = []
    for prm in params_list:
        hs = hitting_set(prm)
        grid = hs.provenance.get("grid", hs.bound)
        rows.append(
            {
                "n": prm.n,
                "k": prm.k,
                "d": prm.d,
                "H": prm.H,
                "ell0": hs.provenance["ell0"],
                "log2_grid": round(math.log2(grid), 6),
                "size": len(hs),
                "bound": hs.bound,
                "log2_bound": round(math.log2(size_bound(prm)), 6),
            }
        )
    return rows


def to_csv(rows: Sequence[Mapping], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in fields})
    return buf.getvalue()


def plot_bench(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Left: emitted size against the bound.  Right: time against size."""
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for verdict, marker in (("nonzero", "o"), ("zero", "x")):
        sel = [r for r in rows if r["verdict"] == verdict]
        ax1.scatter([r["bound"] for r in sel], [r["size"] for r in sel], marker=marker, label=verdict)
        ax2.scatter([r["size"] for r in sel], [r["seconds"] for r in sel], marker=marker, label=verdict)
    if rows:
        top = max(r["bound"] for r in rows)
        ax1.plot([1, top], [1, top], "k--", lw=0.8, label="size = bound")
    for ax in (ax1, ax2):
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.legend(frameon=False, fontsize=8)
    ax1.set_xlabel("closed-form bound")
    ax1.set_ylabel("points emitted")
    ax2.set_xlabel("points emitted")
    ax2.set_ylabel("seconds")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence[Mapping], path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    xs = [r["ell0"] * r["H"] * max(r["log2_grid"], 1.0) for r in rows]
    ax.scatter(xs, [r["log2_bound"] for r in rows])
    ax.set_xlabel("ell0 * H * log2(grid)")
    ax.set_ylabel("log2(bound)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(rows: Sequence[Mapping], csv_path: str | Path, fields: Sequence[str] = BENCH_FIELDS) -> tuple[Path, Path]:
    """Write the CSV and a PNG with the same stem next to it."""
    csv_path = Path(csv_path)
    csv_path.write_text(to_csv(rows, fields))
    png = csv_path.with_suffix(".png")
    (plot_bench if "verdict" in fields else plot_sweep)(rows, png)
    return csv_path, png
