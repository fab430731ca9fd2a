"""End-to-end runs: ingest -> centrality -> embed -> classify -> analyze.

Every stage result lives in a cache directory named after the hash of the
stage's own settings chained with its upstream hashes, so changing a field
invalidates exactly the affected stage and everything downstream.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import analysis, centrality as cent
from .classify import CachedProvider, EvalReport, HyperGrid, ProviderError, nested_cv
from .embed.base import EmbeddingMatrix, ResourceExhausted
from .embed.eigenmaps import eigenmaps_embed
from .embed.line import LineConfig, line_train
from .embed.node2vec import WalkConfig, node2vec_embed
from .embed.sgns import Order
from .graph import ContractViolation, Graph, LabelTable, read_edge_list, read_labels, \
    serialize_edge_list, serialize_labels, to_undirected
from .hashing import canonical_json, config_hash, derive_seed, file_checksum

logger = logging.getLogger(__name__)

ALGORITHMS = ("eigenmaps", "line1", "line2", "node2vec")
CACHE_ENV = "GRAPHEMBED_CACHE"


class MissingArtifact(RuntimeError):
    """An upstream stage has not been run for this configuration."""

    def __init__(self, what: str, producer: str):
        super().__init__(f"no cached {what} for this configuration; run `graphembed {producer}` first")
        self.producer = producer


class StageSkipped(RuntimeError):
    def __init__(self, category: str, reason: str):
        super().__init__(f"{category}: {reason}")
        self.category = category
        self.reason = reason


@dataclass
class PipelineConfig:
    dataset: str
    edges: str
    labels: str
    directed: bool = True
    undirected: bool = False  # drop edge directions after ingestion
    accumulate_weights: bool = False
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    measures: list[str] | None = None
    line: dict = field(default_factory=dict)
    node2vec: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    pagerank: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out: str = "runs"
    cache: str | None = None
    skippable: list[str] = field(default_factory=list)
    normalize_series: bool = False

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        if base is not None:
            for name in ("edges", "labels"):
                p = Path(getattr(cfg, name))
                if not p.is_absolute():
                    setattr(cfg, name, str(base / p))
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base=path.parent)

    def validate(self) -> None:
        for name in ("edges", "labels"):
            if not Path(getattr(self, name)).is_file():
                raise FileNotFoundError(f"{name} file not found: {getattr(self, name)}")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithm(s) {sorted(bad)}; choose from {ALGORITHMS}")
        if self.undirected and not self.directed:
            raise ValueError("'undirected' conversion needs a directed input (directed=true)")

    @property
    def graph_directed(self) -> bool:
        return self.directed and not self.undirected

    def cache_dir(self) -> Path:
        return Path(os.environ.get(CACHE_ENV) or self.cache or Path(self.out) / "cache")

    def hyper_grid(self, algorithm: str) -> HyperGrid:
        g = dict(self.grid)
        extra = {}
        if algorithm == "node2vec":
            extra = {"p": tuple(g.get("p", (0.25, 0.5, 1, 2, 4))), "q": tuple(g.get("q", (0.25, 0.5, 1, 2, 4)))}
        kwargs = {k: tuple(g[k]) for k in ("C_values", "dims", "normalize") if k in g}
        return HyperGrid(extra=extra, **kwargs)


@dataclass
class StageRecord:
    stage: str
    key: str
    status: str  # ok | cached | skipped | failed
    seconds: float = 0.0
    artifacts: dict = field(default_factory=dict)
    reason: str = ""
    category: str = ""


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.cache = cfg.cache_dir()
        self.out = Path(cfg.out)
        self.records: list[StageRecord] = []
        self._graph: tuple[Graph, LabelTable] | None = None
        self._ingest_key: str | None = None

    # -- stage plumbing ----------------------------------------------------
    def _stage_dir(self, stage: str, key: str) -> Path:
        return self.cache / f"{stage}-{key}"

    def _cached(self, stage: str, key: str) -> dict | None:
        done = self._stage_dir(stage, key) / "DONE.json"
        if not done.exists():
            return None
        info = json.loads(done.read_text())
        d = self._stage_dir(stage, key)
        if all((d / name).exists() and file_checksum(d / name) == sha for name, sha in info["artifacts"].items()):
            return info
        return None

    def _run_stage(self, name: str, stage: str, key: str, fn) -> StageRecord:
        """Run ``fn(dir)`` unless a verified cached result exists; record the outcome."""
        info = self._cached(stage, key)
        if info is not None:
            rec = StageRecord(name, key, "cached", 0.0, info["artifacts"])
            self.records.append(rec)
            return rec
        d = self._stage_dir(stage, key)
        tmp = d.with_name(d.name + ".tmp")
        shutil.rmtree(tmp, ignore_errors=True)
        tmp.mkdir(parents=True)
        t0 = time.perf_counter()
        try:
            fn(tmp)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        artifacts = {p.name: file_checksum(p) for p in sorted(tmp.iterdir())}
        (tmp / "DONE.json").write_text(json.dumps({"stage": stage, "key": key, "artifacts": artifacts},
                                                  indent=2, sort_keys=True))
        shutil.rmtree(d, ignore_errors=True)
        tmp.rename(d)
        rec = StageRecord(name, key, "ok", time.perf_counter() - t0, artifacts)
        self.records.append(rec)
        return rec

    def _record_failure(self, name: str, key: str, exc: BaseException) -> StageRecord:
        if isinstance(exc, StageSkipped):
            rec = StageRecord(name, key, "skipped", reason=exc.reason, category=exc.category)
        else:
            rec = StageRecord(name, key, "failed", reason=f"{type(exc).__name__}: {exc}", category="error")
        self.records.append(rec)
        logger.warning("%s %s: %s", name, rec.status, rec.reason)
        return rec

    # -- ingest ------------------------------------------------------------
    def ingest_key(self) -> str:
        if self._ingest_key is None:
            c = self.cfg
            self._ingest_key = config_hash({
                "edges": file_checksum(c.edges), "labels": file_checksum(c.labels), "directed": c.directed,
                "undirected": c.undirected, "accumulate_weights": c.accumulate_weights})
        return self._ingest_key

    def ingest(self) -> StageRecord:
        c = self.cfg

        def work(d: Path):
            g = read_edge_list(c.edges, c.directed, c.accumulate_weights)
            labels = read_labels(c.labels, g)
            stats = asdict(g.stats)
            if c.undirected:
                g = to_undirected(g)
            (d / "graph.edges").write_text(serialize_edge_list(g), encoding="utf-8")
            (d / "labels.txt").write_text(serialize_labels(labels, g), encoding="utf-8")
            (d / "graph.json").write_text(canonical_json({
                "directed": g.directed, "num_nodes": g.num_nodes, "num_edges": g.num_edges,
                "num_classes": labels.num_classes, "ingest": stats}) + "\n")

        return self._run_stage("ingest", "graph", self.ingest_key(), work)

    def graph(self) -> tuple[Graph, LabelTable]:
        if self._graph is None:
            d = self._stage_dir("graph", self.ingest_key())
            if self._cached("graph", self.ingest_key()) is None:
                raise MissingArtifact("graph", "ingest")
            meta = json.loads((d / "graph.json").read_text())
            g = read_edge_list(d / "graph.edges", meta["directed"])
            self._graph = (g, read_labels(d / "labels.txt", g))
        return self._graph

    # -- centrality ----------------------------------------------------------
    def measures(self) -> list[cent.Measure]:
        g, _ = self.graph()
        if self.cfg.measures:
            return [cent.Measure(m) for m in self.cfg.measures]
        return cent.measures_for(g)

    def centrality_key(self, measure: cent.Measure) -> str:
        spec = {"graph": self.ingest_key(), "measure": measure.value}
        if measure is cent.Measure.PAGERANK:
            spec["pagerank"] = asdict(cent.PageRankParams(**self.cfg.pagerank))
        return config_hash(spec)

    def centrality(self, measure: cent.Measure | str) -> StageRecord:
        measure = cent.Measure(measure)
        g, _ = self.graph()
        params = cent.PageRankParams(**self.cfg.pagerank)

        def work(d: Path):
            scores = cent.compute(g, measure, params, workers=self.cfg.workers)
            if measure is cent.Measure.PAGERANK and abs(scores.values.sum() - 1.0) > 1e-9:
                raise ValueError(f"PageRank sums to {scores.values.sum()!r}")
            (d / "scores.txt").write_text(cent.format_scores(scores, g), encoding="utf-8")

        key = self.centrality_key(measure)
        try:
            return self._run_stage(f"centrality:{measure.value}", "centrality", key, work)
        except (ContractViolation, ValueError, cent.ConvergenceError) as exc:
            return self._record_failure(f"centrality:{measure.value}", key, exc)

    def scores(self, measure: cent.Measure) -> cent.CentralityScores:
        key = self.centrality_key(measure)
        if self._cached("centrality", key) is None:
            raise MissingArtifact(f"{measure.value} scores", f"centrality --measure {measure.value}")
        g, _ = self.graph()
        text = (self._stage_dir("centrality", key) / "scores.txt").read_text()
        return cent.parse_scores(text, g, measure)

    # -- embeddings ----------------------------------------------------------
    def embedding_spec(self, algorithm: str, point: dict) -> dict:
        c = self.cfg
        spec = {"graph": self.ingest_key(), "algorithm": algorithm, "point": point,
                "seed": derive_seed(c.seed, "embed", algorithm, config_hash(point)), "workers": c.workers}
        if algorithm in ("line1", "line2"):
            spec["config"] = dict(c.line)
        elif algorithm == "node2vec":
            spec["config"] = dict(c.node2vec)
        return spec

    def _train(self, algorithm: str, spec: dict) -> EmbeddingMatrix:
        g, _ = self.graph()
        point, seed = spec["point"], spec["seed"]
        try:
            if algorithm == "eigenmaps":
                return eigenmaps_embed(g, point["dim"], seed=seed)
            if algorithm in ("line1", "line2"):
                order = Order.FIRST if algorithm == "line1" else Order.SECOND
                return line_train(g, LineConfig(order=order, dim=point["dim"], seed=seed,
                                                workers=spec["workers"], **spec.get("config", {})))
            return node2vec_embed(g, WalkConfig(p=point["p"], q=point["q"], dim=point["dim"], seed=seed,
                                                workers=spec["workers"], **spec.get("config", {})))
        except ContractViolation as exc:
            raise StageSkipped("unsupported", str(exc)) from exc
        except (ResourceExhausted, MemoryError) as exc:
            raise StageSkipped("resource", str(exc) or "out of memory") from exc

    def embed(self, algorithm: str, point: dict) -> StageRecord:
        spec = self.embedding_spec(algorithm, point)
        key = config_hash(spec)

        def work(d: Path):
            emb = self._train(algorithm, spec)
            emb.save(d / "embedding.vec")

        name = f"embed:{algorithm}:" + ",".join(f"{k}={point[k]}" for k in sorted(point))
        try:
            return self._run_stage(name, "embed", key, work)
        except (StageSkipped, FloatingPointError, ValueError, RuntimeError) as exc:
            return self._record_failure(name, key, exc)

    def embedding(self, algorithm: str, point: dict) -> EmbeddingMatrix:
        key = config_hash(self.embedding_spec(algorithm, point))
        if self._cached("embed", key) is None:
            raise MissingArtifact(f"{algorithm} embedding {point}", f"embed --algo {algorithm}")
        return EmbeddingMatrix.load(self._stage_dir("embed", key) / "embedding.vec")

    # -- classification --------------------------------------------------------
    def classify_key(self, algorithm: str) -> str:
        grid = self.cfg.hyper_grid(algorithm)
        embeds = [config_hash(self.embedding_spec(algorithm, p)) for p in grid.embedding_points()]
        return config_hash({"embeddings": embeds, "grid": grid.as_dict(),
                            "seed": derive_seed(self.cfg.seed, "classify")})

    def classify(self, algorithm: str) -> StageRecord:
        grid = self.cfg.hyper_grid(algorithm)
        _, labels = self.graph()

        def work(d: Path):
            provider = CachedProvider(lambda point: self.embedding(algorithm, point))
            report = nested_cv(provider, labels, grid, seed=derive_seed(self.cfg.seed, "classify"))
            report.info.update({"algorithm": algorithm, "dataset": self.cfg.dataset})
            (d / "report.txt").write_text(report.to_text(), encoding="utf-8")

        key = self.classify_key(algorithm)
        try:
            return self._run_stage(f"classify:{algorithm}", "classify", key, work)
        except ProviderError as exc:
            if isinstance(exc.__cause__, MissingArtifact):
                raise exc.__cause__ from None
            return self._record_failure(f"classify:{algorithm}", key, exc)
        except (ValueError, FloatingPointError) as exc:
            return self._record_failure(f"classify:{algorithm}", key, exc)

    def report(self, algorithm: str) -> EvalReport:
        key = self.classify_key(algorithm)
        if self._cached("classify", key) is None:
            raise MissingArtifact(f"{algorithm} evaluation report", f"classify --algo {algorithm}")
        return EvalReport.from_text((self._stage_dir("classify", key) / "report.txt").read_text())

    # -- analysis --------------------------------------------------------------
    def analyze_key(self, algorithm: str, measure: cent.Measure) -> str:
        return config_hash({"report": self.classify_key(algorithm), "scores": self.centrality_key(measure),
                            "normalize": self.cfg.normalize_series})

    def analyze(self, algorithm: str, measure: cent.Measure | str) -> StageRecord:
        measure = cent.Measure(measure)
        report = self.report(algorithm)
        scores = self.scores(measure)
        ds = self.cfg.dataset

        def work(d: Path):
            split = analysis.split_by_correctness(report)
            for subset in ("incorrect", "correct"):
                s = analysis.misclassified_distribution(split, scores, algorithm, subset,
                                                        normalize=self.cfg.normalize_series)
                analysis.emit_series(s, d / analysis.series_filename(ds, algorithm, measure, subset),
                                     ds, self.cfg.seed)

        return self._run_stage(f"analyze:{algorithm}:{measure.value}", "analyze",
                               self.analyze_key(algorithm, measure), work)

    def series(self, algorithm: str, measure: cent.Measure | str, subset: str = "incorrect"):
        measure = cent.Measure(measure)
        key = self.analyze_key(algorithm, measure)
        if self._cached("analyze", key) is None:
            raise MissingArtifact(f"{algorithm}/{measure.value} series",
                                  f"analyze --algo {algorithm} --measure {measure.value}")
        name = analysis.series_filename(self.cfg.dataset, algorithm, measure, subset)
        return analysis.parse_series((self._stage_dir("analyze", key) / name).read_text())

    # -- whole run -------------------------------------------------------------
    def run(self) -> dict:
        self.cfg.validate()
        self.records = []
        self.ingest()
        for m in self.measures():
            self.centrality(m)
        measures_ok = [m for m in self.measures() if self._cached("centrality", self.centrality_key(m))]
        results = {}
        for algo in self.cfg.algorithms:
            grid = self.cfg.hyper_grid(algo)
            blocked = None
            for point in grid.embedding_points():
                rec = self.embed(algo, point)
                if rec.status in ("skipped", "failed"):
                    blocked = rec
                    break
            if blocked is not None:
                self.records.append(StageRecord(f"classify:{algo}", self.classify_key(algo), "skipped",
                                                reason=f"upstream {blocked.stage} {blocked.status}",
                                                category=blocked.category))
                continue
            if self.classify(algo).status == "failed":
                continue
            rep = self.report(algo)
            results[algo] = {"mean_micro_f1": rep.mean, "std_micro_f1": rep.std, "chosen": rep.chosen}
            for m in measures_ok:
                self.analyze(algo, m)
        return self.write_manifest(results)

    def exit_ok(self) -> bool:
        for r in self.records:
            if r.status == "failed":
                return False
            if r.status == "skipped" and r.category not in self.cfg.skippable:
                return False
        return True

    def export(self, rec: StageRecord) -> Path | None:
        """Copy a finished stage's artifacts from the cache into the output directory."""
        if rec.status not in ("ok", "cached"):
            return None
        stage = rec.stage.split(":")[0]
        src = self._stage_dir({"ingest": "graph"}.get(stage, stage), rec.key)
        dst = self.out / stage / rec.stage.replace(":", "_").replace(",", "_").replace("=", "-")
        dst.mkdir(parents=True, exist_ok=True)
        for name in rec.artifacts:
            shutil.copyfile(src / name, dst / name)
        return dst

    def write_manifest(self, results: dict | None = None) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        for r in self.records:
            self.export(r)
        checksums = sorted(f"{r.stage}/{name}:{sha}" for r in self.records for name, sha in r.artifacts.items())
        manifest = {
            "config_hash": config_hash(asdict(self.cfg) | {"out": None, "cache": None}),
            "dataset": self.cfg.dataset,
            "seed": self.cfg.seed,
            "checksum": config_hash(checksums, length=64),
            "recomputed": sum(r.status == "ok" for r in self.records),
            "cache_hits": sum(r.status == "cached" for r in self.records),
            "exit_ok": self.exit_ok(),
            "stages": [asdict(r) for r in self.records],
            "results": results or {},
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest
