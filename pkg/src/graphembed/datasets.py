"""Converters from the public dataset releases to plain ``edges.txt`` / ``labels.txt``.

Canonical files: one ``<src> <dst>`` pair per line (citing -> cited for the
citation graphs) and one ``<node> <class>`` pair per line.
"""
from __future__ import annotations

import csv
import io
import logging
import tarfile
import urllib.request
import zipfile
from pathlib import Path

from .hashing import file_checksum

logger = logging.getLogger(__name__)

SOURCES = {
    "cora": "https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz",
    "pubmed": "https://linqs-data.soe.ucsc.edu/public/Pubmed-Diabetes.tgz",
    "blogcatalog": "http://socialcomputing.asu.edu/uploads/1283153973/BlogCatalog-dataset.zip",
}


def _write(out_dir: Path, edges: list[tuple[str, str]], labels: list[tuple[str, str]]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges), encoding="utf-8")
    (out_dir / "labels.txt").write_text("".join(f"{n} {c}\n" for n, c in labels), encoding="utf-8")


def convert_cora(cites: str, content: str, out_dir) -> None:
    """``cora.cites`` lines are ``<cited> <citing>``; edges are written citing -> cited."""
    edges = []
    for line in cites.splitlines():
        if line.strip():
            cited, citing = line.split()
            edges.append((citing, cited))
    labels = []
    for line in content.splitlines():
        if line.strip():
            parts = line.split()
            labels.append((parts[0], parts[-1]))
    _write(Path(out_dir), edges, labels)


def convert_pubmed(cites_tab: str, nodes_tab: str, out_dir) -> None:
    """Pubmed-Diabetes ``DIRECTED.cites.tab`` rows: ``id  paper:<citing>  |  paper:<cited>``."""
    edges = []
    for line in cites_tab.splitlines()[2:]:
        parts = line.split("\t")
        if len(parts) >= 4:
            edges.append((parts[1].removeprefix("paper:"), parts[3].removeprefix("paper:")))
    labels = []
    for line in nodes_tab.splitlines()[2:]:
        parts = line.split("\t")
        if len(parts) >= 2 and parts[1].startswith("label="):
            labels.append((parts[0], parts[1].removeprefix("label=")))
    _write(Path(out_dir), edges, labels)


def convert_blogcatalog(edges_csv: str, groups_csv: str, out_dir) -> None:
    """Undirected friendship edges; multi-label nodes keep their first listed group."""
    edges = [(r[0], r[1]) for r in csv.reader(io.StringIO(edges_csv)) if len(r) >= 2]
    first: dict[str, str] = {}
    for r in csv.reader(io.StringIO(groups_csv)):
        if len(r) >= 2:
            first.setdefault(r[0], r[1])
    nodes = {u for e in edges for u in e}
    missing = nodes - set(first)
    if missing:
        logger.warning("%d BlogCatalog node(s) have no group and are dropped", len(missing))
        edges = [(u, v) for u, v in edges if u in first and v in first]
    _write(Path(out_dir), edges, sorted(first.items(), key=lambda kv: int(kv[0])))


def _member(names: list[str], suffix: str) -> str:
    for n in names:
        if n.endswith(suffix):
            return n
    raise FileNotFoundError(f"archive has no member ending in {suffix!r}")


def convert_archive(name: str, archive: Path, out_dir: Path) -> None:
    if name == "blogcatalog":
        with zipfile.ZipFile(archive) as z:
            names = z.namelist()
            read = lambda s: z.read(_member(names, s)).decode("utf-8")
            convert_blogcatalog(read("/edges.csv"), read("/group-edges.csv"), out_dir)
        return
    with tarfile.open(archive) as t:
        names = t.getnames()
        read = lambda s: t.extractfile(_member(names, s)).read().decode("utf-8")
        if name == "cora":
            convert_cora(read("cora.cites"), read("cora.content"), out_dir)
        else:
            convert_pubmed(read("DIRECTED.cites.tab"), read("NODE.paper.tab"), out_dir)


def fetch(name: str, data_dir, checksums: dict) -> Path:
    """Download (if needed), verify and convert one dataset into ``data_dir/<name>``.

    ``checksums`` maps archive name to sha256; unknown archives are recorded
    on first download and verified on every later call.
    """
    url = SOURCES[name]
    data_dir = Path(data_dir)
    archive = data_dir / "raw" / url.rsplit("/", 1)[-1]
    if not archive.exists():
        archive.parent.mkdir(parents=True, exist_ok=True)
        logger.info("downloading %s", url)
        with urllib.request.urlopen(url, timeout=120) as resp:
            archive.write_bytes(resp.read())
    sha = file_checksum(archive)
    expected = checksums.get(archive.name)
    if expected is None:
        checksums[archive.name] = sha
    elif expected != sha:
        raise ValueError(f"checksum mismatch for {archive.name}: {sha} != {expected}")
    convert_archive(name, archive, data_dir / name)
    return data_dir / name
