"""``cluster-quilt`` command line.

Subcommands: simulate, quilt, evaluate, tune, diagnose, sweep.

Data go to stdout (one JSON document); errors go to stderr as one JSON
object.  Exit codes:

    0  success
    1  unexpected internal failure
    2  invalid input or configuration
    3  disconnected patches / no feasible ordering / empty overlap
    4  singular merge transform

Set ``QUILT_LOG`` (e.g. ``DEBUG``, ``INFO``) to control log verbosity on
stderr.  Every run writes ``run_manifest.json`` into its output directory
(the working directory for commands run without ``--out``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (EmptyOverlapError, InvalidInputError, NoFeasibleOrderingError, QuiltError,
                     SingularTransformError, SizeCapError, SplitInfeasibleError)
from .io import (LoadError, atomic_directory, load_manifest, read_json, read_labels, read_matrix_csv,
                 save_patchset, write_json, write_labels, write_matrix_csv)
from .kmeans import KMeansConfig
from .metrics import adjusted_rand_index, misclustering_rate
from .quilt import cluster_quilting, impute_matrix
from .simulate import MixtureGroundTruth, SimConfig, simulate

log = logging.getLogger("clusterquilt")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SINGULAR = 0, 1, 2, 3, 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, SingularTransformError):
        return EXIT_SINGULAR
    if isinstance(exc, (NoFeasibleOrderingError, EmptyOverlapError, SplitInfeasibleError, SizeCapError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, InvalidInputError):
        return EXIT_INPUT
    return EXIT_INTERNAL


def error_payload(exc: BaseException) -> dict:
    out = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code_for(exc)}
    for attr in ("field", "constraint", "step", "patch", "condition", "retries", "path"):
        v = getattr(exc, attr, None)
        if v is not None:
            out[attr] = v
    return out


def _versions():
    import scipy

    return {"clusterquilt": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


class _Run:
    """Collects timings and warnings; writes the run manifest."""

    def __init__(self, command, argv, config, seed=None):
        self.command, self.argv, self.config, self.seed = command, list(argv), config, seed
        self.timings, self.warnings = {}, []
        self._t0 = time.perf_counter()

    def lap(self, name, t_start):
        self.timings[name] = time.perf_counter() - t_start

    def manifest(self):
        self.timings["total"] = time.perf_counter() - self._t0
        return {"command": self.command, "argv": self.argv, "config_echo": self.config, "seed": self.seed,
                "versions": _versions(), "timings": self.timings, "warnings": self.warnings}

    def write(self, directory):
        directory = Path(directory) if directory else Path.cwd()
        directory.mkdir(parents=True, exist_ok=True)
        write_json(directory / "run_manifest.json", self.manifest())


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"expected comma-separated integers, got {text!r}") from exc


def _given(text):
    if text is None:
        return None
    path = Path(text)
    if path.exists():
        value = read_json(path)
    else:
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LoadError(f"--given is neither a file nor a JSON array: {text!r}", "json-syntax") from exc
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise InvalidInputError("--given must be a JSON array of patch indices")
    return value


def _ordering_args(args):
    given = _given(args.given)
    if args.ordering == "given" and given is None:
        raise InvalidInputError("--ordering given needs --given")
    return given


# ---------------------------------------------------------------- simulate
def cmd_simulate(args, argv):
    t = time.perf_counter()
    cfg_dict = read_json(args.config)
    if args.seed is not None:
        if not isinstance(cfg_dict, dict):
            raise InvalidInputError("configuration must be a JSON object")
        cfg_dict = {**cfg_dict, "seed": args.seed}
    cfg = SimConfig.from_dict(cfg_dict)
    run = _Run("simulate", argv, {"sim": cfg.to_dict(), "emit_full": args.emit_full}, cfg.seed)
    sim = simulate(cfg)
    run.lap("generate", t)
    stage = atomic_directory(args.out)
    try:
        save_patchset(sim.patches, stage.path)
        write_labels(stage.path / "labels.csv", sim.truth.z)
        write_matrix_csv(stage.path / "theta.csv", sim.truth.Theta)
        truth = sim.truth.to_dict()
        truth.pop("Theta")
        truth.pop("labels")
        truth["Delta_m"] = sim.truth.Delta_m(sim.patches).tolist()
        truth["noise_norms"] = sim.truth.noise_norms(sim.patches).tolist()
        write_json(stage.path / "truth.json", truth)
        write_json(stage.path / "config.json", cfg.to_dict())
        if args.emit_full:
            write_matrix_csv(stage.path / "full.csv", sim.X)
        run.write(stage.path)
    except BaseException:
        stage.abort()
        raise
    out = stage.commit()
    _emit({"out": str(out), "M": sim.patches.M, "n": cfg.n, "p": cfg.p})
    return EXIT_OK


# ---------------------------------------------------------------- quilt
def cmd_quilt(args, argv):
    given = _ordering_args(args)
    ps = load_manifest(args.manifest)
    kcfg = KMeansConfig(restarts=args.restarts, seed=args.seed)
    config = {"manifest": str(args.manifest), "rank": args.rank, "clusters": args.clusters,
              "ordering": args.ordering, "score": args.score, "given": given, "restarts": args.restarts,
              "emit_imputed": args.emit_imputed}
    run = _Run("quilt", argv, config, args.seed)
    t = time.perf_counter()
    ordering = given if args.ordering == "given" else args.ordering
    res = cluster_quilting(ps, args.rank, args.clusters, ordering=ordering, score=args.score, kmeans_cfg=kcfg)
    run.lap("quilt", t)
    run.warnings.extend(res.warnings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_labels(out / "labels.csv", res.labels)
    write_json(out / "result.json", res.to_dict())
    write_matrix_csv(out / "centroids.csv", res.centroids)
    if args.emit_imputed:
        write_matrix_csv(out / "imputed.csv", impute_matrix(res))
    run.write(out)
    _emit({"out": str(out), "ordering": res.ordering_used.to_dict(), "kmeans_objective": res.kmeans_objective,
           "warnings": res.warnings})
    return EXIT_OK


# ---------------------------------------------------------------- evaluate
def cmd_evaluate(args, argv):
    a, b = read_labels(args.labels_a), read_labels(args.labels_b)
    if a.size != b.size:
        raise InvalidInputError(f"label files differ in length: {a.size} vs {b.size}")
    run = _Run("evaluate", argv, {"labels_a": str(args.labels_a), "labels_b": str(args.labels_b)})
    result = {"ari": adjusted_rand_index(a, b), "miscluster": misclustering_rate(a, b)}
    run.write(args.out)
    _emit(result)
    return EXIT_OK


# ---------------------------------------------------------------- tune
def cmd_tune(args, argv):
    from .tuning import TuneGrid, tune

    ps = load_manifest(args.manifest)
    grid = TuneGrid(_int_list(args.rank), _int_list(args.clusters), args.split_fraction, args.repeats)
    config = {"manifest": str(args.manifest), "ranks": list(grid.ranks), "cluster_counts": list(grid.cluster_counts),
              "split_fraction": grid.split_fraction, "repeats": grid.repeats, "ordering": args.ordering,
              "score": args.score, "restarts": args.restarts}
    run = _Run("tune", argv, config, args.seed)
    t = time.perf_counter()
    res = tune(ps, grid, seed=args.seed, ordering=args.ordering, score=args.score,
               kmeans_cfg=KMeansConfig(restarts=args.restarts, seed=args.seed))
    run.lap("tune", t)
    payload = res.to_dict()
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "tune.json", payload)
    run.write(args.out)
    _emit(payload)
    return EXIT_OK


# ---------------------------------------------------------------- diagnose
def load_truth(directory, ps) -> MixtureGroundTruth:
    """Ground truth written by ``simulate`` (theta.csv, labels.csv, truth.json).

    Only observed entries of the noise are recoverable, which is all the
    bound needs.
    """
    directory = Path(directory)
    Theta = read_matrix_csv(directory / "theta.csv")
    z = read_labels(directory / "labels.csv")
    meta = read_json(directory / "truth.json")
    if Theta.shape[1] != ps.p or z.size != ps.n:
        raise InvalidInputError("ground truth does not match the patch set dimensions")
    X_star = Theta[z].T
    noise = np.nan_to_num(ps.to_masked() - X_star, nan=0.0)
    return MixtureGroundTruth(Theta, z, int(meta.get("r", np.linalg.matrix_rank(Theta))),
                              float(meta.get("d", np.nan)), noise)


def cmd_diagnose(args, argv):
    from .diagnostics import ar1_dependency_norm, data_driven_ordering_check, diagnose

    given = _ordering_args(args)
    ps = load_manifest(args.manifest)
    truth = load_truth(args.truth, ps) if args.truth else None
    ordering = given if args.ordering == "given" else args.ordering
    config = {"manifest": str(args.manifest), "rank": args.rank, "ordering": args.ordering, "score": args.score,
              "given": given, "truth": None if args.truth is None else str(args.truth), "rho": args.rho}
    run = _Run("diagnose", argv, config)
    rep = diagnose(ps, args.rank, ordering=ordering, score=args.score, truth=truth)
    payload = rep.to_dict()
    if truth is not None:
        payload["ordering_check"] = data_driven_ordering_check(ps, truth.X_star, args.rank).to_dict()
    if args.rho is not None:
        payload["ar1"] = ar1_dependency_norm(args.rho, ps.p)
    run.warnings.extend(rep.warnings)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "diagnostics.json", payload)
        (out / "diagnostics.txt").write_text(rep.table() + "\n")
    run.write(args.out)
    if args.table:
        sys.stdout.write(rep.table() + "\n")
    else:
        _emit(payload)
    return EXIT_OK


# ---------------------------------------------------------------- sweep
def cmd_sweep(args, argv):
    from .sweep import SweepConfig, render_svg, run_sweep, summarize, write_rows

    sc = SweepConfig.from_dict(read_json(args.config))
    run = _Run("sweep", argv, {"sweep": sc.to_dict(), "jobs": args.jobs})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    rows = run_sweep(sc, jobs=args.jobs)
    run.lap("sweep", t)
    run.warnings.extend(f"{r['axis']}={r['value']} seed={r['seed']}: {r['status']}" for r in rows
                        if r["status"] != "ok")
    summary = summarize(rows)
    write_rows(out / "sweep.csv", rows)
    write_json(out / "summary.json", summary)
    render_svg(out / "sweep.svg", summary, sc.axis)
    run.write(out)
    _emit({"out": str(out), "summary": summary})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cluster-quilt", description="Cluster Quilting for patchwork-observed data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def ordering_flags(sp):
        sp.add_argument("--ordering", choices=("exhaustive", "greedy", "given"), default="exhaustive")
        sp.add_argument("--score", choices=("size", "snr"), default="size")
        sp.add_argument("--given", help="JSON array permutation (or a file holding one) for --ordering given")

    s = sub.add_parser("simulate", help="generate a patchwork data set")
    s.add_argument("config", help="SimConfig JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--emit-full", action="store_true", help="also write the full p x n matrix")
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("quilt", help="cluster a patch manifest")
    q.add_argument("manifest")
    q.add_argument("--rank", type=int, required=True)
    q.add_argument("--clusters", type=int, required=True)
    ordering_flags(q)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--restarts", type=int, default=25)
    q.add_argument("--out", required=True)
    q.add_argument("--emit-imputed", action="store_true")
    q.set_defaults(func=cmd_quilt)

    e = sub.add_parser("evaluate", help="compare two label files")
    e.add_argument("labels_a")
    e.add_argument("labels_b")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    t = sub.add_parser("tune", help="choose rank and cluster count by prediction validation")
    t.add_argument("manifest")
    t.add_argument("--rank", default="1,2,3", help="comma-separated candidate ranks")
    t.add_argument("--clusters", default="2,3,4", help="comma-separated candidate cluster counts")
    t.add_argument("--split-fraction", type=float, default=0.5)
    t.add_argument("--repeats", type=int, default=5)
    t.add_argument("--ordering", choices=("exhaustive", "greedy"), default="exhaustive")
    t.add_argument("--score", choices=("size", "snr"), default="size")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--restarts", type=int, default=25)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tune)

    d = sub.add_parser("diagnose", help="overlap signal, merge factor and error-bound diagnostics")
    d.add_argument("manifest")
    d.add_argument("--rank", type=int, required=True)
    ordering_flags(d)
    d.set_defaults(score="snr")
    d.add_argument("--truth", help="directory written by simulate (enables oracle quantities)")
    d.add_argument("--rho", type=float, help="AR(1) feature-noise coefficient; reports its noise inflation")
    d.add_argument("--table", action="store_true", help="print a text table instead of JSON")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    w = sub.add_parser("sweep", help="replicated simulation sweep with CSV and SVG output")
    w.add_argument("config", help="sweep JSON: base SimConfig, axis, values, seeds")
    w.add_argument("--out", required=True)
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)
    return p


def _setup_logging():
    level = os.environ.get("QUILT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, argv)
    except QuiltError as exc:
        sys.stderr.write(json.dumps(error_payload(exc), sort_keys=True) + "\n")
        return exit_code_for(exc)
    except Exception as exc:  # noqa: BLE001 - report, never traceback on stdout
        log.debug("internal failure", exc_info=True)
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": EXIT_INTERNAL}
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
