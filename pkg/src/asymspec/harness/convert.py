"""Converters from common public graph-dataset dumps to the bundle format.

Supported sources:

``geom-gcn``
    ``out1_node_feature_label.txt`` (tab-separated ``id, features, label`` with
    comma-separated features) and ``out1_graph_edges.txt`` (tab-separated id
    pairs), each with one header line. Used for Texas, Cornell, Wisconsin,
    Chameleon, Squirrel, Actor.
``planetoid``
    The pickled ``ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index}`` files.
``linqs``
    ``<name>.content`` (``paper_id features... class_label``) and
    ``<name>.cites`` (``cited citing``).
"""

from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..exceptions import LoadError
from ..graphcore import Graph
from .datasets import DatasetBundle

FORMATS = ("geom-gcn", "planetoid", "linqs")


def _dense_labels(raw) -> tuple[np.ndarray, int]:
    classes, labels = np.unique(np.asarray(raw), return_inverse=True)
    return labels.astype(np.int64), len(classes)


def from_geom_gcn(src, name: str) -> DatasetBundle:
    src = Path(src)
    nodes = src / "out1_node_feature_label.txt"
    edges_path = src / "out1_graph_edges.txt"
    ids, feats, labs = [], [], []
    try:
        lines = nodes.read_text().splitlines()[1:]
    except OSError as exc:
        raise LoadError(f"{nodes}: cannot read ({exc.strerror})") from exc
    for lineno, line in enumerate(lines, start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise LoadError(f"{nodes}:{lineno}: expected 3 tab-separated fields")
        ids.append(int(parts[0]))
        feats.append(np.array(parts[1].split(","), dtype=np.float64))
        labs.append(int(parts[2]))
    order = np.argsort(ids)
    if not np.array_equal(np.asarray(ids)[order], np.arange(len(ids))):
        raise LoadError(f"{nodes}: node ids are not 0..n-1")
    x = np.stack(feats)[order]
    labels, c = _dense_labels(np.asarray(labs)[order])
    try:
        elines = edges_path.read_text().splitlines()[1:]
    except OSError as exc:
        raise LoadError(f"{edges_path}: cannot read ({exc.strerror})") from exc
    edges = np.array([[int(v) for v in ln.split("\t")] for ln in elines if ln.strip()], dtype=np.int64)
    g = Graph(len(ids), edges.reshape(-1, 2), x, labels, c)
    return DatasetBundle(g, name, f"converted from geom-gcn dump at {src.name}")


def from_planetoid(src, name: str) -> DatasetBundle:
    src = Path(src)
    obj = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        path = src / f"ind.{name}.{key}"
        try:
            with open(path, "rb") as fh:
                obj[key] = pickle.load(fh, encoding="latin1")
        except OSError as exc:
            raise LoadError(f"{path}: cannot read ({exc.strerror})") from exc
    idx_path = src / f"ind.{name}.test.index"
    test_idx = np.array([int(v) for v in idx_path.read_text().split()], dtype=np.int64)
    test_sorted = np.sort(test_idx)
    tx, ty = obj["tx"], obj["ty"]
    lo, hi = test_sorted.min(), test_sorted.max()
    if name == "citeseer":
        # isolated test nodes are missing from the dump; pad with zeros
        full = hi - lo + 1
        tx_ext = sp.lil_matrix((full, tx.shape[1]))
        tx_ext[test_sorted - lo, :] = tx
        ty_ext = np.zeros((full, ty.shape[1]))
        ty_ext[test_sorted - lo, :] = ty
        tx, ty = tx_ext, ty_ext
    feats = sp.vstack((obj["allx"], tx)).tolil()
    feats[test_idx, :] = feats[test_sorted, :]
    onehot = np.vstack((obj["ally"], ty))
    onehot[test_idx, :] = onehot[test_sorted, :]
    n = feats.shape[0]
    edges = [(i, j) for i, nbrs in obj["graph"].items() for j in nbrs if i < n and j < n]
    labels = onehot.argmax(axis=1)
    labels[onehot.sum(axis=1) == 0] = 0
    labels, c = _dense_labels(labels)
    g = Graph(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), feats.toarray(), labels, c)
    return DatasetBundle(g, name, f"converted from planetoid dump at {src.name}")


def from_linqs(src, name: str) -> DatasetBundle:
    src = Path(src)
    content = src / f"{name}.content"
    cites = src / f"{name}.cites"
    ids, feats, labs = [], [], []
    for lineno, line in enumerate(content.read_text().splitlines(), start=1):
        parts = line.split()
        if len(parts) < 3:
            raise LoadError(f"{content}:{lineno}: too few fields")
        ids.append(parts[0])
        feats.append(np.array(parts[1:-1], dtype=np.float64))
        labs.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    edges = []
    for line in cites.read_text().splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] in index and parts[1] in index:
            edges.append((index[parts[0]], index[parts[1]]))
    labels, c = _dense_labels(labs)
    g = Graph(len(ids), np.asarray(edges, dtype=np.int64).reshape(-1, 2), np.stack(feats), labels, c)
    return DatasetBundle(g, name, f"converted from LINQS dump at {src.name}")


def convert(fmt: str, src, name: str) -> DatasetBundle:
    if fmt == "geom-gcn":
        return from_geom_gcn(src, name)
    if fmt == "planetoid":
        return from_planetoid(src, name)
    if fmt == "linqs":
        return from_linqs(src, name)
    raise LoadError(f"unknown source format {fmt!r}; expected one of {FORMATS}")
