"""Command-line interface: ``agc run|sweep|eval|filter|gen-sbm|baseline|convert-planetoid``."""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from . import __version__
from .convolve import convolve_k, response_table
from .datagen import SbmSpec, gen_sbm
from .driver import AgcConfig, run_agc, sweep_k, sweep_tsv
from .errors import AgcError, ValidationError
from .formats import (
    format_edges,
    format_features,
    format_labels,
    read_edges,
    read_features,
    read_labels,
    write_atomic,
)
from .graph import SparseGraph, propagation_operator, remap_ids
from .metrics import NMI_AVERAGES, evaluate
from .spectral import DENSE_EIGEN_LIMIT, cluster_similarity, spectral_cluster

log = logging.getLogger("agc")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextlib.contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.stages[name] = round(time.perf_counter() - t0, 6)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_inputs(args, timer):
    with timer.stage("load"):
        x = read_features(args.features)
        g = read_edges(args.edges, n_hint=x.shape[0])
        labels = read_labels(args.labels) if getattr(args, "labels", None) else None
    if g.n != x.shape[0]:
        raise ValidationError(f"edge list references node {g.n - 1} but features have {x.shape[0]} rows")
    if labels is not None and labels.shape[0] != g.n:
        raise ValidationError(f"label file has {labels.shape[0]} entries, graph has {g.n} nodes")
    return g, x, labels


def _config(args) -> AgcConfig:
    return AgcConfig(
        m=args.clusters,
        max_iter=getattr(args, "max_iter", 60),
        seed=args.seed,
        restarts=args.restarts,
        normalize_rows=args.normalize_rows,
        scale_by_eigenvalues=args.scale_by_eigenvalues,
        nmi_average=args.nmi_average,
        dense_limit=args.dense_eigen_limit,
    )


def _manifest(args, cfg, outputs, timer, extra=None) -> str:
    inputs = {}
    for key in ("edges", "features", "labels"):
        path = getattr(args, key, None)
        if path:
            inputs[key] = {"path": str(path), "sha256": _sha256(path)}
    doc = {
        "tool": "agc",
        "version": __version__,
        "command": args.command,
        "inputs": inputs,
        "config": asdict(cfg) if cfg is not None else None,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "timings_s": timer.stages,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _manifest_path(args, outputs) -> Path | None:
    if getattr(args, "out_manifest", None):
        return Path(args.out_manifest)
    for path in outputs.values():
        return Path(str(path) + ".manifest.json")
    return None


def _write_all(files: dict) -> None:
    for path, text in files.items():
        write_atomic(path, text)


def cmd_run(args) -> int:
    timer = _Timer()
    g, x, labels = _load_inputs(args, timer)
    cfg = _config(args)
    with timer.stage("agc"):
        result = run_agc(g, x, cfg)
    with timer.stage("metrics"):
        report = evaluate(result.partition, labels, result.filtered, nmi_average=cfg.nmi_average, k_selected=result.k)

    outputs, files = {}, {}
    if args.out_labels:
        outputs["labels"] = args.out_labels
        files[args.out_labels] = format_labels(result.partition.labels)
    if args.out_metrics:
        outputs["metrics"] = args.out_metrics
        files[args.out_metrics] = report.to_json() + "\n"
    if args.out_trace:
        outputs["trace"] = args.out_trace
        files[args.out_trace] = result.trace.to_jsonl()
    if args.out_filtered:
        outputs["filtered"] = args.out_filtered
        files[args.out_filtered] = format_features(result.filtered)
    manifest = _manifest_path(args, outputs)
    if manifest is not None:
        extra = {"selected_k": result.k, "stop_reason": result.trace.stop_reason}
        files[manifest] = _manifest(args, cfg, outputs, timer, extra)
    _write_all(files)

    print(f"selected_k={result.k}\tintra={report.intra!r}\tstop_reason={result.trace.stop_reason}")
    if report.acc is not None:
        print(f"acc={report.acc:.4f}\tnmi={report.nmi:.4f}\tf1={report.macro_f1:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    timer = _Timer()
    g, x, labels = _load_inputs(args, timer)
    cfg = _config(args)
    with timer.stage("sweep"):
        rows = sweep_k(g, x, args.k_max, cfg, labels=labels)
    text = sweep_tsv(rows)
    if args.out:
        files = {args.out: text}
        files[_manifest_path(args, {"sweep": args.out})] = _manifest(args, cfg, {"sweep": args.out}, timer)
        _write_all(files)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    xbar = read_features(args.features) if args.features else None
    report = evaluate(pred, truth, xbar, nmi_average=args.nmi_average)
    text = report.to_json() + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_filter(args) -> int:
    timer = _Timer()
    with timer.stage("load"):
        x = read_features(args.features)
        g = read_edges(args.edges, n_hint=x.shape[0])
    with timer.stage("filter"):
        xbar = convolve_k(propagation_operator(g), x, args.k)
    files = {args.out: format_features(xbar)}
    outputs = {"filtered": args.out}
    if args.response_out:
        table = response_table(args.k, args.grid)
        lines = ["lambda\tresponse"] + [f"{float(lam)!r}\t{float(p)!r}" for lam, p in table]
        files[args.response_out] = "\n".join(lines) + "\n"
        outputs["response"] = args.response_out
    files[_manifest_path(args, outputs)] = _manifest(args, None, outputs, timer, {"k": args.k})
    _write_all(files)
    return EXIT_OK


def cmd_gen_sbm(args) -> int:
    spec = SbmSpec(
        n=args.n, m=args.m, p_in=args.p_in, p_out=args.p_out, d=args.d,
        mu_sep=args.mu_sep, sigma=args.sigma, seed=args.seed,
    )
    g, x, truth = gen_sbm(spec)
    out = Path(args.out_dir)
    _write_all({
        out / "edges.tsv": format_edges(g),
        out / "features.csv": format_features(x),
        out / "labels.txt": format_labels(truth.labels),
        out / "spec.json": spec.to_json() + "\n",
    })
    print(f"n={g.n}\tedges={g.num_edges}\tout={out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    timer = _Timer()
    g, x, labels = _load_inputs(args, timer)
    with timer.stage("cluster"):
        kw = dict(seed=args.seed, restarts=args.restarts,
                  normalize_rows=args.normalize_rows, scale_by_eigenvalues=args.scale_by_eigenvalues,
                  dense_limit=args.dense_eigen_limit)
        if args.input == "features":
            part = spectral_cluster(x, args.clusters, **kw)
        else:
            part = cluster_similarity(g.adjacency.toarray(), args.clusters, **kw)
    report = evaluate(part, labels, x if args.input == "features" else None, nmi_average=args.nmi_average)
    files = {}
    if args.out_labels:
        files[args.out_labels] = format_labels(part.labels)
    if args.out_metrics:
        files[args.out_metrics] = report.to_json() + "\n"
    _write_all(files)
    sys.stdout.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_convert_planetoid(args) -> int:
    """Convert ``<name>.content`` / ``<name>.cites`` into the package's formats."""
    ids: dict[str, int] = {}
    classes: dict[str, int] = {}
    rows, labels = [], []
    with open(args.content, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            rows.append(parts[1:-1])
            labels.append(classes.setdefault(parts[-1], len(classes)))
    pairs = []
    skipped = 0
    with open(args.cites, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] in ids and parts[1] in ids:
                pairs.append((ids[parts[0]], ids[parts[1]]))
            else:
                skipped += 1
    out = Path(args.out_dir)
    g = SparseGraph.from_edges(len(ids), pairs)
    _write_all({
        out / "edges.tsv": format_edges(g),
        out / "features.csv": "".join(",".join(r) + "\n" for r in rows),
        out / "labels.txt": format_labels(labels),
        out / "id_map.tsv": "".join(f"{k}\t{v}\n" for k, v in ids.items()),
        out / "classes.tsv": "".join(f"{k}\t{v}\n" for k, v in classes.items()),
    })
    print(f"n={g.n}\tedges={g.num_edges}\tcites_lines={len(pairs) + skipped}\tskipped={skipped}\tclasses={len(classes)}")
    return EXIT_OK


def _add_inputs(p, labels=True):
    p.add_argument("--edges", required=True, help="edge list (u v [w] per line)")
    p.add_argument("--features", required=True, help="feature CSV, n rows, no header")
    if labels:
        p.add_argument("--labels", help="ground-truth labels, one integer per line")


def _add_clustering(p):
    p.add_argument("--clusters", "-m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--normalize-rows", action="store_true", help="row-normalize the spectral embedding")
    p.add_argument("--scale-by-eigenvalues", action="store_true")
    p.add_argument("--nmi-average", choices=NMI_AVERAGES, default="geometric")
    p.add_argument("--dense-eigen-limit", type=int, default=DENSE_EIGEN_LIMIT,
                   help="largest n solved with dense LAPACK; Lanczos above it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"agc {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/LAPACK threads (default: $AGC_THREADS or all cores)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="adaptive graph convolution clustering")
    _add_inputs(p)
    _add_clustering(p)
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--out-labels")
    p.add_argument("--out-metrics")
    p.add_argument("--out-trace")
    p.add_argument("--out-filtered", help="filtered features at the selected order")
    p.add_argument("--out-manifest")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="evaluate every order 1..k-max as TSV")
    _add_inputs(p)
    _add_clustering(p)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--out-manifest")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="score a predicted labeling")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--features", help="(filtered) features for intra-cluster distance")
    p.add_argument("--nmi-average", choices=NMI_AVERAGES, default="geometric")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("filter", help="write k-order filtered features")
    _add_inputs(p, labels=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--response-out", help="TSV of (lambda, p(lambda)) samples")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out-manifest")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("gen-sbm", help="generate a planted-partition attributed graph")
    d = SbmSpec()
    for name in ("n", "m", "d", "seed"):
        p.add_argument(f"--{name}", type=int, default=getattr(d, name))
    for name in ("p_in", "p_out", "mu_sep", "sigma"):
        p.add_argument(f"--{name.replace('_', '-')}", type=float, default=getattr(d, name))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("baseline", help="spectral clustering on features or on the adjacency")
    _add_inputs(p)
    _add_clustering(p)
    p.add_argument("--input", choices=("features", "graph"), default="features")
    p.add_argument("--out-labels")
    p.add_argument("--out-metrics")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("convert-planetoid", help="convert .content/.cites files")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_convert_planetoid)
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        threads = args.threads
    else:
        env = os.environ.get("AGC_THREADS")
        if not env:
            return None
        try:
            threads = int(env)
        except ValueError:
            raise ValidationError(f"AGC_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads}")
    # OpenBLAS crashes if raised above the pool size it was started with
    pools = [info["num_threads"] for info in threadpool_info()]
    if pools and threads > min(pools):
        log.warning("capping threads at %d (set OPENBLAS_NUM_THREADS before start for more)", min(pools))
        threads = min(pools)
    return threads


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        threads = _threads(args)
        with threadpool_limits(limits=threads):
            return args.func(args)
    except (AgcError, OSError) as exc:
        print(f"agc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"agc: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
