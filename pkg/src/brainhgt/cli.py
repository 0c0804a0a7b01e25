"""Command-line entry point: ``brainhgt {generate,graph,train,eval,ablate,sweep,export}``.

Every command writes into ``--out`` and leaves a ``manifest.json`` there.
Errors map to process exit codes through ``BrainHGTError.exit_code``.
"""

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from . import io as bio
from .clustering import community_interaction_diff, export_assignment
from .data import Cohort, SyntheticCohortConfig, build_graph, generate_synthetic_cohort, prepare
from .errors import BadConfig, BrainHGTError, DisconnectedInput, IoError, MissingArtifact
from .graph import pearson_correlation
from .lsra import write_attention
from .metrics import classification_metrics
from .model import VARIANTS, BrainHGT, ModelConfig
from .training import (SplitProtocol, TrainConfig, hop_sweep, predict, run_repeats,
                       sparsifier_comparison, stratified_split, train)

log = logging.getLogger("brainhgt")

CONFIG_SECTIONS = ("cohort", "model", "train", "split", "graph")


# ---------------------------------------------------------------- config

def load_config(path):
    """Read the experiment JSON; missing sections fall back to defaults."""
    if path is None:
        raw = {}
    else:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise BadConfig(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise BadConfig("config must be a JSON object")
    unknown = set(raw) - set(CONFIG_SECTIONS)
    if unknown:
        raise BadConfig(f"unknown config sections: {sorted(unknown)}")
    graph = dict(raw.get("graph", {}))
    extra = set(graph) - {"method", "density", "densities", "hops"}
    if extra:
        raise BadConfig(f"unknown graph options: {sorted(extra)}")
    try:
        return {
            "cohort": SyntheticCohortConfig.from_dict(raw.get("cohort", {})),
            "model": ModelConfig.from_dict(raw.get("model", {})),
            "train": TrainConfig.from_dict(raw.get("train", {})),
            "split": SplitProtocol.from_dict(raw.get("split", {})),
            "graph": graph,
        }
    except TypeError as exc:
        raise BadConfig(str(exc)) from exc


def config_to_dict(cfg):
    return {k: (v if isinstance(v, dict) else v.to_dict()) for k, v in cfg.items()}


def config_hash(cfg_dict):
    blob = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out, command, cfg_dict, seed, started, outputs):
    manifest = {
        "command": command,
        "config": cfg_dict,
        "config_hash": config_hash(cfg_dict),
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(p) for p in outputs),
    }
    (Path(out) / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def write_rows(path, rows, columns=None):
    """CSV of dict rows; reals with 17 significant digits."""
    columns = columns or list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return bio.fmt(v)
    return v


def parse_list(text, kind=float):
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise BadConfig(f"cannot parse list {text!r}") from exc


# ---------------------------------------------------------------- cohorts

def save_cohort(cohort, out):
    out = Path(out)
    subj = out / "subjects"
    subj.mkdir(parents=True, exist_ok=True)
    files = []
    for s, ts in enumerate(cohort.timeseries):
        path = subj / f"subject_{s:04d}.bhgt"
        bio.write_bhgt(path, ts)
        files.append(path)
    write_rows(out / "labels.csv",
               [{"subject": s, "file": f"subjects/subject_{s:04d}.bhgt", "label": int(y)}
                for s, y in enumerate(cohort.labels)])
    (out / "communities.json").write_text(json.dumps({
        "names": cohort.network_names,
        "labels": [int(c) for c in cohort.communities],
    }) + "\n")
    bio.write_voxel_json(out / "voxels.json", cohort.roi_voxels, cohort.network_voxels,
                         cohort.network_names)
    return files + [out / "labels.csv", out / "communities.json", out / "voxels.json"]


def load_cohort(path):
    """Rebuild a :class:`Cohort` from a directory written by ``generate``."""
    root = Path(path)
    if not (root / "labels.csv").exists():
        raise MissingArtifact(f"no cohort at {root} (labels.csv missing)")
    with open(root / "labels.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise IoError(f"{root / 'labels.csv'} lists no subjects")
    ts = np.stack([bio.read_matrix(root / r["file"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    comm = json.loads((root / "communities.json").read_text())
    spec = json.loads((root / "voxels.json").read_text())
    return Cohort(ts, labels, np.array(comm["labels"], dtype=np.int64),
                  [r["voxels"] for r in spec["rois"]],
                  [f["voxels"] for f in spec["networks"]],
                  None, comm.get("names", []))


def _graph_options(cfg, args):
    method = args.method or cfg["graph"].get("method", "omst")
    density = args.density if args.density is not None else cfg["graph"].get("density", 0.15)
    if method not in ("omst", "threshold"):
        raise BadConfig(f"unknown method {method!r}")
    if not 0 < density <= 1:
        raise BadConfig(f"density {density} outside (0, 1]")
    return method, float(density)


def _model_cfg(cfg, cohort, variant=None):
    m = replace(cfg["model"], n_rois=cohort.timeseries.shape[1],
                k_communities=len(cohort.network_voxels))
    if variant is not None:
        if variant not in VARIANTS:
            raise BadConfig(f"unknown variant {variant!r}")
        m = replace(m, variant=variant)
    return m.validate()


# ---------------------------------------------------------------- commands

def cmd_generate(args, cfg):
    cohort_cfg = cfg["cohort"] if args.seed is None else replace(cfg["cohort"], seed=args.seed)
    cohort = generate_synthetic_cohort(cohort_cfg)
    files = save_cohort(cohort, args.out)
    (Path(args.out) / "cohort.json").write_text(json.dumps(cohort_cfg.to_dict(), indent=2) + "\n")
    log.info("wrote %d subjects to %s", len(cohort), args.out)
    return files + [Path(args.out) / "cohort.json"]


def cmd_graph(args, cfg):
    cohort = load_cohort(args.cohort)
    method, density = _graph_options(cfg, args)
    out = Path(args.out)
    gdir = out / "graphs"
    gdir.mkdir(parents=True, exist_ok=True)
    rows, files = [], []
    for s, ts in enumerate(cohort.timeseries):
        r = pearson_correlation(ts)
        try:
            g = build_graph(r, method, density)
        except DisconnectedInput as exc:
            raise DisconnectedInput(f"subject {s}: {exc}") from exc
        stem = gdir / f"subject_{s:04d}"
        side = bio.write_graph(stem, g)
        files += [stem.with_suffix(".edges.csv"), stem.with_suffix(".json")]
        rows.append({"subject": s, **side})
    write_rows(out / "graph_summary.csv", rows)
    return files + [out / "graph_summary.csv"]


def _prepare(cfg, args, cohort):
    method, density = _graph_options(cfg, args)
    return prepare(cohort, method, density)


def _history_rows(history):
    return [{"epoch": h["epoch"], "loss": h["loss"], "val_auc": h["val_auc"]} for h in history]


def cmd_train(args, cfg):
    cohort = load_cohort(args.cohort)
    gs = _prepare(cfg, args, cohort)
    model_cfg = _model_cfg(cfg, cohort, args.variant)
    seed = cfg["train"].seed if args.seed is None else args.seed
    tr, va, te = stratified_split(gs.labels, cfg["split"], seed)
    result = train(model_cfg, gs.subset(tr), gs.subset(va), replace(cfg["train"], seed=seed))
    model = BrainHGT(result.model_cfg, params=result.params)
    metrics = classification_metrics(predict(model, gs.subset(te)), gs.labels[te])
    out = Path(args.out)
    ck = checkpoint.save(result.params, out / "checkpoint.bhck")
    write_rows(out / "metrics.csv", [{"variant": model_cfg.variant, "seed": seed,
                                      "best_epoch": result.best_epoch,
                                      "best_val_auc": result.best_val_auc, **metrics}])
    write_rows(out / "history.csv", _history_rows(result.history), ["epoch", "loss", "val_auc"])
    run = {"cohort": str(Path(args.cohort).resolve()), "model": model_cfg.to_dict(),
           "method": _graph_options(cfg, args)[0], "density": _graph_options(cfg, args)[1],
           "seed": seed, "split": {"train": tr.tolist(), "val": va.tolist(), "test": te.tolist()}}
    (out / "run.json").write_text(json.dumps(run, indent=2) + "\n")
    log.info("test auc %.4f (best epoch %d)", metrics["auc"], result.best_epoch)
    return [ck, ck.with_suffix(".json"), out / "metrics.csv", out / "history.csv", out / "run.json"]


def _load_run(run_dir):
    run_dir = Path(run_dir)
    if not (run_dir / "run.json").exists():
        raise MissingArtifact(f"{run_dir} is not a training run (run.json missing)")
    run = json.loads((run_dir / "run.json").read_text())
    params = checkpoint.load(run_dir / "checkpoint.bhck")
    return run, BrainHGT(ModelConfig.from_dict(run["model"]), params=params)


def cmd_eval(args, cfg):
    run, model = _load_run(args.run)
    cohort = load_cohort(args.cohort or run["cohort"])
    gs = prepare(cohort, run["method"], run["density"])
    te = np.asarray(run["split"]["test"])
    metrics = classification_metrics(predict(model, gs.subset(te)), gs.labels[te])
    out = Path(args.out)
    write_rows(out / "eval_metrics.csv", [{"seed": run["seed"], **metrics}])
    return [out / "eval_metrics.csv"]


def cmd_ablate(args, cfg):
    cohort = load_cohort(args.cohort)
    gs = _prepare(cfg, args, cohort)
    variants = [args.variant] if args.variant else list(VARIANTS)
    protocol = cfg["split"]
    if args.seed is not None:
        protocol = replace(protocol, seeds=[args.seed + i for i in range(protocol.repeats)])
    summary_rows, repeat_rows = [], []
    for v in variants:
        rows, summary = run_repeats(_model_cfg(cfg, cohort, v), gs, protocol, cfg["train"])
        summary_rows.append({"variant": v, **summary})
        repeat_rows += [{"variant": v, **r} for r in rows]
    out = Path(args.out)
    write_rows(out / "metrics.csv", summary_rows)
    write_rows(out / "repeats.csv", repeat_rows)
    return [out / "metrics.csv", out / "repeats.csv"]


def cmd_sweep(args, cfg):
    cohort = load_cohort(args.cohort)
    protocol = cfg["split"]
    if args.seed is not None:
        protocol = replace(protocol, seeds=[args.seed + i for i in range(protocol.repeats)])
    out = Path(args.out)
    files = []
    hops = parse_list(args.hops) if args.hops else cfg["graph"].get("hops")
    densities = parse_list(args.densities) if args.densities else cfg["graph"].get("densities")
    if not hops and not densities:
        hops = [1, 2, 3, 4]
    model_cfg = _model_cfg(cfg, cohort, args.variant)
    if hops:
        gs = _prepare(cfg, args, cohort)
        table = hop_sweep(hops, model_cfg, gs, protocol, cfg["train"], learn_hop=args.learn_hop)
        write_rows(out / "hop_sweep.csv", table)
        files.append(out / "hop_sweep.csv")
    if densities:
        table = sparsifier_comparison(densities, model_cfg, cohort, protocol, cfg["train"])
        write_rows(out / "sparsifier_comparison.csv", table)
        files.append(out / "sparsifier_comparison.csv")
    return files


def cmd_export(args, cfg):
    """Plot-ready CSVs from a training run: attention, assignment, prior,
    hard labels and the class-1 minus class-0 community interaction matrix."""
    run, model = _load_run(args.run)
    cohort = load_cohort(args.cohort or run["cohort"])
    gs = prepare(cohort, run["method"], run["density"])
    out = Path(args.out) / "interpretability"
    out.mkdir(parents=True, exist_ok=True)
    mc = model.cfg
    short, long_, assign, comm = [], [], [], []
    for s in range(len(gs)):
        cap = {}
        model.forward(gs.corr[s:s + 1], gs.spl[s:s + 1], gs.prior, capture=cap)
        short.append(cap["short"][0])
        long_.append(cap["long"][0])
        if "assignment" in cap:
            assign.append(cap["assignment"][0])
            comm.append(cap["community"][0])
    index = write_attention(out, "mean", {"short": np.mean(short, axis=0),
                                          "long": np.mean(long_, axis=0)}, mc.heads)
    for entry in index:
        entry["kind"] = "attention"
    if assign:
        P = np.mean(assign, axis=0)
        P = P / P.sum(axis=1, keepdims=True)
        export_assignment(P, gs.prior, out, cohort.network_names or None)
        k = P.shape[1]
        index += [{"kind": "assignment", "file": "assignment.csv", "shape": list(P.shape)},
                  {"kind": "prior", "file": "prior.csv", "shape": list(gs.prior.shape)},
                  {"kind": "hard_labels", "file": "hard_labels.json", "shape": [P.shape[0]]}]
        comm = np.asarray(comm)
        labels = gs.labels
        if (labels == 1).any() and (labels == 0).any():
            diff = community_interaction_diff(comm[labels == 1], comm[labels == 0])
            bio.write_matrix_csv(out / "interaction_diff.csv", diff)
            index.append({"kind": "interaction_diff", "file": "interaction_diff.csv",
                          "shape": [k, k], "definition": "mean(class 1) - mean(class 0)"})
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    return [out / e["file"] for e in index] + [out / "index.json"]


COMMANDS = {
    "generate": cmd_generate,
    "graph": cmd_graph,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--seed", type=int, help="overrides the configured seed")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads (1 = deterministic)")
    common.add_argument("--out", required=True, help="output directory")

    parser = argparse.ArgumentParser(prog="brainhgt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="synthesize a cohort")

    def graph_flags(p):
        p.add_argument("--method", choices=("omst", "threshold"))
        p.add_argument("--density", type=float)

    p = sub.add_parser("graph", parents=[common], help="sparsify every subject")
    p.add_argument("cohort")
    graph_flags(p)

    for name in ("train", "ablate", "sweep"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("cohort")
        p.add_argument("--variant", choices=VARIANTS)
        graph_flags(p)
        if name == "sweep":
            p.add_argument("--hops", help="comma-separated hop values")
            p.add_argument("--densities", help="comma-separated threshold densities")
            p.add_argument("--learn-hop", action="store_true",
                           help="let hop train from each initial value")

    for name in ("eval", "export"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("run", help="directory written by `train`")
        p.add_argument("--cohort", help="cohort directory (default: the one used in training)")
    return parser


def _configure_logging():
    level = os.environ.get("BRAINHGT_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _thread_limit(n):
    if n < 1:
        raise BadConfig("--threads must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        cfg = load_config(args.config)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with _thread_limit(args.threads) if args.threads else contextlib.nullcontext():
            outputs = COMMANDS[args.command](args, cfg)
        seed = args.seed if args.seed is not None else cfg["train"].seed
        write_manifest(args.out, args.command, config_to_dict(cfg), seed, started, outputs)
    except BrainHGTError as exc:
        print(f"brainhgt {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
