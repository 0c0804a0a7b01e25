"""File formats: CSV matrices, the ``BHGT`` time-series binary, edge lists,
and Dice-prior inputs."""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .clustering import dice_prior, floor_empty_rows
from .errors import BadShape, IoError

BHGT_MAGIC = b"BHGT"


def fmt(x):
    """17 significant digits: round-trips any float64 exactly."""
    return format(float(x), ".17g")


def write_matrix_csv(path, m, header=None):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(",".join(str(h) for h in header) + "\n")
        for row in m:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def read_matrix_csv(path, return_header=False):
    """Row-major numeric CSV; a non-numeric first row is treated as a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise IoError(str(exc)) from exc
    header = None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            header, rows = rows[0], rows[1:]
    try:
        m = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise IoError(f"{path}: non-numeric entry ({exc})") from exc
    if m.ndim != 2:
        raise BadShape(f"{path}: ragged rows")
    return (m, header) if return_header else m


def write_bhgt(path, values):
    """``b"BHGT" | u32 N | u32 T | N*T little-endian f64`` (row-major)."""
    values = np.asarray(values, dtype="<f8")
    if values.ndim != 2:
        raise BadShape("BHGT payload must be 2-D")
    n, t = values.shape
    with open(path, "wb") as fh:
        fh.write(BHGT_MAGIC + struct.pack("<II", n, t))
        fh.write(np.ascontiguousarray(values).tobytes())


def read_bhgt(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if blob[:4] != BHGT_MAGIC or len(blob) < 12:
        raise IoError(f"{path}: not a BHGT file")
    n, t = struct.unpack_from("<II", blob, 4)
    if len(blob) != 12 + 8 * n * t:
        raise IoError(f"{path}: payload length does not match {n}x{t}")
    return np.frombuffer(blob, dtype="<f8", offset=12).reshape(n, t).astype(np.float64)


def read_matrix(path):
    """Load a matrix from ``.bhgt`` binary or CSV, chosen by content."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return read_bhgt(path) if head == BHGT_MAGIC else read_matrix_csv(path)


def write_graph(path_stem, graph):
    """Edge list ``i,j,weight`` plus a JSON sidecar with the graph summary."""
    stem = Path(path_stem)
    with open(stem.with_suffix(".edges.csv"), "w", newline="") as fh:
        fh.write("i,j,weight\n")
        for (i, j) in graph.edges():
            fh.write(f"{i},{j},{fmt(graph.edge_weights[(i, j)])}\n")
    side = {
        "n_nodes": int(graph.n),
        "n_edges": len(graph.edge_weights),
        "density": graph.density,
        "ge": graph.ge,
        "cost": graph.cost,
        "objective": graph.objective,
    }
    stem.with_suffix(".json").write_text(json.dumps(side, indent=2) + "\n")
    return side


def read_edge_list(path, n):
    adj = np.zeros((n, n), dtype=np.int8)
    m, _ = read_matrix_csv(path, return_header=True)
    for i, j, _w in m:
        adj[int(i), int(j)] = adj[int(j), int(i)] = 1
    return adj


def load_prior_csv(path):
    """N x K prior with a header row of community names; empty rows floored."""
    m, header = read_matrix_csv(path, return_header=True)
    return floor_empty_rows(m), header


def load_voxel_json(path):
    """Dice prior from ``{rois: [{id, voxels}], networks: [{name, voxels}]}``."""
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise IoError(f"{path}: {exc}") from exc
    rois = [r["voxels"] for r in spec["rois"]]
    nets = [f["voxels"] for f in spec["networks"]]
    names = [f.get("name", f"network_{k}") for k, f in enumerate(spec["networks"])]
    return floor_empty_rows(dice_prior(rois, nets)), names


def write_voxel_json(path, roi_voxels, network_voxels, names=None):
    names = names or [f"network_{k}" for k in range(len(network_voxels))]
    spec = {
        "rois": [{"id": i, "voxels": [int(v) for v in vox]} for i, vox in enumerate(roi_voxels)],
        "networks": [{"name": nm, "voxels": [int(v) for v in vox]}
                     for nm, vox in zip(names, network_voxels)],
    }
    Path(path).write_text(json.dumps(spec) + "\n")
