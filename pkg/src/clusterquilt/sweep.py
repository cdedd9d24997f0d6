"""Replicated simulation sweeps along one configuration axis."""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidConfigError, QuiltError
from .kmeans import KMeansConfig
from .metrics import adjusted_rand_index, misclustering_rate
from .quilt import cluster_quilting
from .simulate import SimConfig, simulate

CSV_FIELDS = ("axis", "value", "seed", "ari", "miscluster", "runtime", "status")


@dataclass(frozen=True)
class SweepConfig:
    base: SimConfig
    axis: str
    values: tuple
    seeds: tuple
    rank: Optional[int] = None
    clusters: Optional[int] = None
    ordering: str = "exhaustive"
    score: str = "size"
    restarts: int = 25

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        if not isinstance(data, dict):
            raise InvalidConfigError("sweep configuration must be a JSON object")
        allowed = {"base", "axis", "values", "seeds", "rank", "clusters", "ordering", "score", "restarts"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise InvalidConfigError(f"unknown sweep keys: {unknown}", field=unknown[0])
        for key in ("base", "axis", "values"):
            if key not in data:
                raise InvalidConfigError(f"sweep configuration needs {key!r}", field=key)
        base = SimConfig.from_dict(data["base"])
        axis = data["axis"]
        if axis not in base.to_dict() or axis == "seed":
            raise InvalidConfigError(f"{axis!r} is not a sweepable SimConfig field", field="axis")
        values = data["values"]
        if not isinstance(values, list) or not values:
            raise InvalidConfigError("values must be a nonempty list", field="values")
        for v in values:  # validate every grid point up front
            base.replace(**{axis: v})
        seeds = data.get("seeds", 10)
        seeds = tuple(range(seeds)) if isinstance(seeds, int) else tuple(int(s) for s in seeds)
        if not seeds:
            raise InvalidConfigError("need at least one seed", field="seeds")
        return cls(base, axis, tuple(values), seeds, data.get("rank"), data.get("clusters"),
                   data.get("ordering", "exhaustive"), data.get("score", "size"), int(data.get("restarts", 25)))

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "axis": self.axis, "values": list(self.values),
                "seeds": list(self.seeds), "rank": self.rank, "clusters": self.clusters,
                "ordering": self.ordering, "score": self.score, "restarts": self.restarts}


def run_replicate(sc: SweepConfig, value, seed: int) -> dict:
    """One simulate-then-quilt run; failures become a row with a status tag."""
    row = {"axis": sc.axis, "value": value, "seed": seed, "ari": math.nan, "miscluster": math.nan}
    t0 = time.perf_counter()
    try:
        cfg = sc.base.replace(**{sc.axis: value, "seed": seed})
        sim = simulate(cfg)
        r = sc.rank if sc.rank is not None else cfg.r
        K = sc.clusters if sc.clusters is not None else cfg.K
        res = cluster_quilting(sim.patches, r, K, ordering=sc.ordering, score=sc.score,
                               kmeans_cfg=KMeansConfig(restarts=sc.restarts, seed=seed))
        row["ari"] = adjusted_rand_index(res.labels, sim.truth.z)
        row["miscluster"] = misclustering_rate(res.labels, sim.truth.z)
        row["status"] = "ok"
    except QuiltError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    row["runtime"] = time.perf_counter() - t0
    return row


def _star(args):
    return run_replicate(*args)


def run_sweep(sc: SweepConfig, jobs: int = 1) -> list:
    """Rows in (value, seed) order regardless of ``jobs``."""
    tasks = [(sc, v, s) for v in sc.values for s in sc.seeds]
    if jobs <= 1:
        return [run_replicate(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, tasks))


def summarize(rows: Sequence[dict]) -> list:
    """Per axis value: mean and sd of ARI and misclustering over successful runs."""
    out = []
    values = list(dict.fromkeys(r["value"] for r in rows))
    for v in values:
        ok = [r for r in rows if r["value"] == v and r["status"] == "ok"]
        ari = np.array([r["ari"] for r in ok])
        ell = np.array([r["miscluster"] for r in ok])
        out.append({"value": v, "n_ok": len(ok), "n_failed": sum(r["value"] == v for r in rows) - len(ok),
                    "ari_mean": float(ari.mean()) if ok else None,
                    "ari_sd": float(ari.std(ddof=1)) if len(ok) > 1 else 0.0,
                    "miscluster_mean": float(ell.mean()) if ok else None})
    return out


def write_rows(path, rows, runtime: bool = True) -> None:
    """CSV of replicate rows; ``runtime=False`` blanks timings for golden comparisons."""
    from .io import format_float

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            cells = []
            for key in CSV_FIELDS:
                v = r[key]
                if key == "runtime" and not runtime:
                    v = ""
                elif isinstance(v, float):
                    v = "" if math.isnan(v) else format_float(v)
                cells.append(v)
            w.writerow(cells)


def render_svg(path, summary, axis: str, title: Optional[str] = None) -> None:
    """Mean ARI with a one-sd band against the axis value; output is byte-stable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [s["value"] for s in summary]
    numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in labels)
    x = np.array(labels if numeric else range(len(labels)), dtype=float)
    y = np.array([s["ari_mean"] for s in summary], dtype=float)
    sd = np.array([s["ari_sd"] for s in summary], dtype=float)
    with matplotlib.rc_context({"svg.hashsalt": "cluster-quilt", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.fill_between(x, y - sd, y + sd, alpha=0.25, color="tab:blue", linewidth=0)
        ax.plot(x, y, marker="o", color="tab:blue")
        ax.set_xlabel(axis)
        ax.set_ylabel("mean ARI")
        low = np.nanmin(y - sd) if np.isfinite(y).any() else 0.0
        ax.set_ylim(min(-0.05, float(low) - 0.05), 1.05)
        if not numeric:
            ax.set_xticks(x, [str(v) for v in labels])
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(Path(path), format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
