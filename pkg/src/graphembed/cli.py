"""Command line entry point: ``graphembed <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .centrality import Measure
from .pipeline import ALGORITHMS, MissingArtifact, Pipeline, PipelineConfig


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON pipeline config; flags below override its fields")
    p.add_argument("--dataset", help="dataset name used in output file names")
    p.add_argument("--edges", help="edge list file")
    p.add_argument("--labels", help="node label file")
    d = p.add_mutually_exclusive_group()
    d.add_argument("--directed", dest="directed", action="store_true", default=None,
                   help="read edges as directed")
    d.add_argument("--undirected-input", dest="directed", action="store_false",
                   help="read edges as undirected")
    p.add_argument("--to-undirected", dest="undirected", action="store_true", default=None,
                   help="ignore edge directions after reading")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--cache", help="cache directory (GRAPHEMBED_CACHE takes precedence)")
    p.add_argument("--workers", type=int, help="threads/processes for embed and centrality stages")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphembed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("ingest", help="parse and cache the graph and labels"))

    p = sub.add_parser("centrality", help="compute centrality scores")
    _common(p)
    p.add_argument("--measure", action="append", choices=[m.value for m in Measure],
                   help="measure(s) to compute (default: all for the graph type)")

    p = sub.add_parser("embed", help="train embeddings for one algorithm")
    _common(p)
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    p.add_argument("--dim", type=int, help="only this dimension (default: every grid dimension)")
    p.add_argument("--p", type=float, help="node2vec return parameter")
    p.add_argument("--q", type=float, help="node2vec in-out parameter")

    p = sub.add_parser("classify", help="nested cross-validation over the hyperparameter grid")
    _common(p)
    p.add_argument("--algo", required=True, choices=ALGORITHMS)

    p = sub.add_parser("analyze", help="centrality distributions of misclassified nodes")
    _common(p)
    p.add_argument("--algo", action="append", choices=ALGORITHMS)
    p.add_argument("--measure", action="append", choices=[m.value for m in Measure])

    p = sub.add_parser("run", help="run every stage")
    _common(p)
    p.add_argument("--algo", action="append", choices=ALGORITHMS, help="restrict to these algorithms")
    p.add_argument("--measure", action="append", choices=[m.value for m in Measure])
    return parser


def load_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        cfg = PipelineConfig.load(args.config)
    else:
        missing = [f"--{n}" for n in ("dataset", "edges", "labels") if getattr(args, n) is None]
        if missing:
            raise SystemExit(f"error: without --config, {' '.join(missing)} must be given")
        cfg = PipelineConfig(args.dataset, args.edges, args.labels)
    for name in ("dataset", "edges", "labels", "directed", "undirected", "seed", "out", "cache", "workers"):
        val = getattr(args, name, None)
        if val is not None:
            data[name] = val
    algo = getattr(args, "algo", None)
    if isinstance(algo, list):
        data["algorithms"] = algo
    measure = getattr(args, "measure", None)
    if measure:
        data["measures"] = measure
    for k, v in data.items():
        setattr(cfg, k, v)
    cfg.validate()
    return cfg


def _points(pipe: Pipeline, args) -> list[dict]:
    points = pipe.cfg.hyper_grid(args.algo).embedding_points()
    want = {k: v for k, v in (("dim", args.dim), ("p", args.p), ("q", args.q)) if v is not None}
    if args.algo != "node2vec":
        want.pop("p", None)
        want.pop("q", None)
    chosen = [pt for pt in points if all(pt.get(k) == v for k, v in want.items())]
    if not chosen and "dim" in want:
        pt = {"dim": want["dim"]}
        if args.algo == "node2vec":
            pt.update(p=want.get("p", 1.0), q=want.get("q", 1.0))
        chosen = [pt]
    return chosen


def _report(pipe: Pipeline, rec) -> bool:
    where = pipe.export(rec)
    line = f"{rec.stage}: {rec.status}"
    if rec.reason:
        line += f" ({rec.reason})"
    if where is not None:
        line += f" -> {where}"
    print(line)
    if rec.status == "failed":
        return False
    return rec.status != "skipped" or rec.category in pipe.cfg.skippable


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args)
    pipe = Pipeline(cfg)
    try:
        if args.command == "run":
            manifest = pipe.run()
            for r in manifest["stages"]:
                extra = f" ({r['reason']})" if r["reason"] else ""
                print(f"{r['stage']}: {r['status']}{extra}")
            for algo, res in manifest["results"].items():
                print(f"{algo}: micro-F1 {res['mean_micro_f1']:.4f} +/- {res['std_micro_f1']:.4f}")
            print(f"manifest: {pipe.out / 'manifest.json'}")
            return 0 if manifest["exit_ok"] else 1
        ok = True
        if args.command == "ingest":
            ok = _report(pipe, pipe.ingest())
            print(json.dumps(json.loads((pipe._stage_dir("graph", pipe.ingest_key()) / "graph.json").read_text())))
        elif args.command == "centrality":
            for m in pipe.measures():
                ok &= _report(pipe, pipe.centrality(m))
        elif args.command == "embed":
            for pt in _points(pipe, args):
                rec = pipe.embed(args.algo, pt)
                ok &= _report(pipe, rec)
                if rec.status in ("ok", "cached"):
                    print(f"  checksum {rec.artifacts['embedding.vec']}")
        elif args.command == "classify":
            rec = pipe.classify(args.algo)
            ok = _report(pipe, rec)
            if rec.status in ("ok", "cached"):
                rep = pipe.report(args.algo)
                print(f"micro-F1 {rep.mean:.4f} +/- {rep.std:.4f}")
        elif args.command == "analyze":
            for algo in args.algo or cfg.algorithms:
                for m in pipe.measures():
                    ok &= _report(pipe, pipe.analyze(algo, m))
        return 0 if ok else 1
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
