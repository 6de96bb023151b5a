"""Dataset bundles: a directory of plain-text files describing one graph.

Layout::

    meta.json      {"n_nodes": n, "n_features": d, "n_classes": C, "name": ...}
    edges.csv      two integer columns per line, 0-indexed, undirected
    features.csv   n lines of d comma-separated decimals
    labels.csv     one integer per line

``meta.json`` may carry an optional ``provenance`` string.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import InputError, LoadError
from ..graphcore import Graph, edge_homophily

logger = logging.getLogger(__name__)

META_KEYS = ("n_nodes", "n_features", "n_classes", "name")


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    graph: Graph
    name: str
    provenance: str = ""

    def stats(self) -> dict:
        g = self.graph
        try:
            h = edge_homophily(g)
        except ValueError:
            h = math.nan
        return {
            "name": self.name,
            "n_nodes": g.n_nodes,
            "n_edges": g.n_edges,
            "n_features": g.n_features,
            "n_classes": g.n_classes,
            "edge_homophily": h,
        }

    def stats_row(self) -> str:
        s = self.stats()
        return (
            f"{s['name']}\tnodes={s['n_nodes']}\tedges={s['n_edges']}\tfeatures={s['n_features']}"
            f"\tclasses={s['n_classes']}\tH_edge={s['edge_homophily']:.4f}"
        )


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text().splitlines()
    except OSError as exc:
        raise LoadError(f"{path}: cannot read ({exc.strerror})") from exc


def _parse_int_rows(path: Path, width: int) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != width:
            raise LoadError(f"{path}:{lineno}: expected {width} column(s), found {len(parts)}")
        try:
            rows.append([int(p) for p in parts])
        except ValueError as exc:
            raise LoadError(f"{path}:{lineno}: not an integer: {line.strip()!r}") from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, width)


def _parse_features(path: Path, n: int, d: int) -> np.ndarray:
    out = np.empty((n, d))
    row = 0
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        if row >= n:
            raise LoadError(f"{path}:{lineno}: more than {n} feature rows")
        parts = line.split(",")
        if len(parts) != d:
            raise LoadError(f"{path}:{lineno}: expected {d} columns, found {len(parts)}")
        try:
            out[row] = np.array(parts, dtype=np.float64)
        except ValueError as exc:
            raise LoadError(f"{path}:{lineno}: malformed decimal ({exc})") from exc
        row += 1
    if row != n:
        raise LoadError(f"{path}: {row} feature rows, meta.json declares {n}")
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.isfinite(out))[0, 0])
        raise LoadError(f"{path}: non-finite feature on data row {bad + 1}")
    return out


def load_dataset(path) -> DatasetBundle:
    """Read and validate a bundle directory; logs its statistics."""
    root = Path(path)
    if not root.is_dir():
        raise LoadError(f"{root}: not a dataset directory")
    meta_path = root / "meta.json"
    try:
        meta = json.loads(meta_path.read_text())
    except OSError as exc:
        raise LoadError(f"{meta_path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"{meta_path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    missing = [k for k in META_KEYS if k not in meta]
    if missing:
        raise LoadError(f"{meta_path}: missing keys {missing}")
    n, d, c = int(meta["n_nodes"]), int(meta["n_features"]), int(meta["n_classes"])
    if n <= 0 or d <= 0 or c <= 0:
        raise LoadError(f"{meta_path}: counts must be positive")

    edges = _parse_int_rows(root / "edges.csv", 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        line = int(np.argwhere((edges < 0) | (edges >= n))[0, 0])
        raise LoadError(f"{root / 'edges.csv'}: edge row {line + 1} has an endpoint outside [0, {n})")
    labels = _parse_int_rows(root / "labels.csv", 1).ravel()
    if labels.size != n:
        raise LoadError(f"{root / 'labels.csv'}: {labels.size} labels, meta.json declares {n}")
    present = np.unique(labels)
    if not np.array_equal(present, np.arange(c)):
        raise LoadError(
            f"{root / 'labels.csv'}: labels must be exactly 0..{c - 1}, found {present.tolist()}"
        )
    features = _parse_features(root / "features.csv", n, d)
    try:
        graph = Graph(n, edges, features, labels, c)
    except InputError as exc:
        raise LoadError(f"{root}: {exc}") from exc
    bundle = DatasetBundle(graph, str(meta["name"]), str(meta.get("provenance", "")))
    logger.info("loaded %s", bundle.stats_row())
    return bundle


def save_dataset(bundle: DatasetBundle, path) -> Path:
    """Write a bundle; the output round-trips through :func:`load_dataset`."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    g = bundle.graph
    meta = {
        "n_nodes": g.n_nodes,
        "n_features": g.n_features,
        "n_classes": g.n_classes,
        "name": bundle.name,
    }
    if bundle.provenance:
        meta["provenance"] = bundle.provenance
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (root / "edges.csv").write_text("".join(f"{i},{j}\n" for i, j in g.edges))
    feats = g.features.toarray() if hasattr(g.features, "toarray") else np.asarray(g.features)
    # shortest repr round-trips exactly
    (root / "features.csv").write_text("".join(",".join(map(repr, row.tolist())) + "\n" for row in feats))
    (root / "labels.csv").write_text("".join(f"{int(v)}\n" for v in g.labels))
    return root


def toy_bundle() -> DatasetBundle:
    """Four nodes on a path with two classes; mirrors tests/fixtures/toy4."""
    edges = np.array([[0, 1], [1, 2], [2, 3]])
    x = np.array([[1.0, 0.0], [0.8, 0.2], [0.1, 0.9], [0.0, 1.0]])
    return DatasetBundle(Graph(4, edges, x, np.array([0, 0, 1, 1]), 2), "toy4", "hand-written fixture")


def make_csbm(
    n_nodes: int = 200,
    n_classes: int = 5,
    n_features: int = 100,
    avg_degree: float = 4.0,
    homophily: float = 0.5,
    feature_signal: float = 1.0,
    seed=0,
    name: str | None = None,
) -> DatasetBundle:
    """Contextual stochastic block model with a target edge homophily.

    Each node draws ``avg_degree / 2`` edges in expectation; an edge stays
    within the class with probability ``homophily``. Features are class
    means plus unit Gaussian noise.
    """
    if not 0.0 <= homophily <= 1.0:
        raise InputError("homophily must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_nodes) % n_classes
    rng.shuffle(labels)
    members = [np.flatnonzero(labels == c) for c in range(n_classes)]
    m = int(round(n_nodes * avg_degree / 2))
    src = rng.integers(0, n_nodes, size=m)
    same = rng.random(m) < homophily
    dst = np.empty(m, dtype=np.int64)
    for e in range(m):
        c = labels[src[e]]
        if same[e] or n_classes == 1:
            dst[e] = rng.choice(members[c])
        else:
            other = (c + rng.integers(1, n_classes)) % n_classes
            dst[e] = rng.choice(members[other])
    means = feature_signal * rng.standard_normal((n_classes, n_features)) / math.sqrt(n_features) * 3.0
    x = means[labels] + rng.standard_normal((n_nodes, n_features)) / math.sqrt(n_features) * 3.0
    g = Graph(n_nodes, np.stack([src, dst], axis=1), x, labels, n_classes)
    label = name or f"csbm_h{homophily:.2f}"
    return DatasetBundle(g, label, f"synthetic CSBM seed={seed} target homophily={homophily}")
