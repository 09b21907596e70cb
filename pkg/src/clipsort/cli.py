"""Command-line entry point wiring the modules into reproducible pipelines.

Subcommands: ``gen`` (synthetic dataset), ``ingest`` (curate SRT + frame
manifests), ``train`` (checkpoint + loss CSV), ``infer`` (predictions
JSONL), ``eval`` (metric CSV), ``oracle`` (brute-force cross-checks), and
``report`` (aggregate metric CSVs). Every run writes a ``*.manifest.json``
recording the command, config snapshot, seed, and artifact hashes.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import ClusterConfig
from .datagen import DEFAULT_RATIOS, default_config_set, generate_dataset
from .inference import EvalReport, InferenceConfig, evaluate_split, format_table, infer_order, write_metrics_csv
from .ingest import curate_movie, dataset_stats, read_frame_manifest, split_dataset
from .model import ModelConfig, load_checkpoint, save_checkpoint, train, write_loss_trace
from .oracles import run_all
from .types import ground_truth_permutation, read_clips_jsonl, write_clips_jsonl
from .util import derive_seed

DATA_DIR_ENV = "CLIPSORT_DATA_DIR"


def _resolve(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int, inputs, outputs, started: float) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
        "wall_time_s": round(time.time() - started, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{command}.manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Layer a JSON config under explicit flags (flags win, then file, then defaults)."""
    if not getattr(args, "config", None):
        return
    with open(_resolve(args.config), "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if getattr(args, attr) == parser.get_default(attr):
            setattr(args, attr, value)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen(args, parser) -> int:
    started = time.time()
    _apply_config_file(args, parser)
    out_dir = _resolve(args.out)
    configs = default_config_set(
        d_v=args.dv, d_u=args.du, drift=args.drift, noise=args.noise, pair_rate=args.pair_rate
    )
    ratios = tuple(float(x) for x in args.ratios.split(","))
    manifest = generate_dataset(configs, args.clips, ratios, args.seed, out_dir, clips_per_movie=args.clips_per_movie)
    outputs = [out_dir / info["path"] for info in manifest["splits"].values()]
    _write_manifest(out_dir, "gen", {"clips": args.clips, "ratios": ratios, "dv": args.dv, "du": args.du,
                                     "drift": args.drift, "noise": args.noise, "pair_rate": args.pair_rate},
                    args.seed, [], outputs, started)
    for name, info in manifest["splits"].items():
        print(f"gen: {name}: {info['n_clips']} clips -> {out_dir / info['path']}")
    return 0


def _cmd_ingest(args, parser) -> int:
    started = time.time()
    _apply_config_file(args, parser)
    srt_dir = _resolve(args.srt_dir)
    frames_dir = _resolve(args.frames_dir)
    out_dir = _resolve(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_clips = []
    srt_files = sorted(srt_dir.glob("*.srt"))
    if not srt_files:
        print(f"ingest: no .srt files under {srt_dir}", file=sys.stderr)
        return 1
    for srt_path in srt_files:
        movie_id = srt_path.stem
        manifest_path = frames_dir / f"{movie_id}.csv"
        if not manifest_path.exists():
            print(f"ingest: missing frame manifest {manifest_path}", file=sys.stderr)
            return 1
        frames = read_frame_manifest(manifest_path)
        srt_text = srt_path.read_text(encoding="utf-8")
        clips = curate_movie(srt_text, frames, movie_id,
                             keep_gap_ms=args.keep_gap_ms, text_dim=args.text_dim, feature_root=frames_dir)
        all_clips.extend(clips)
        print(f"ingest: {movie_id}: {len(clips)} clips")

    splits = split_dataset(all_clips, ratios=tuple(float(x) for x in args.ratios.split(",")), seed=args.seed)
    outputs = []
    for name, clips in splits.items():
        path = out_dir / f"{name}.jsonl"
        write_clips_jsonl(path, clips)
        outputs.append(path)
        print(f"ingest: {name}: {len(clips)} clips -> {path}")
    stats_path = out_dir / "stats.json"
    with open(stats_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dataset_stats(all_clips), fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append(stats_path)
    _write_manifest(out_dir, "ingest", {"keep_gap_ms": args.keep_gap_ms, "text_dim": args.text_dim},
                    args.seed, [str(srt_dir), str(frames_dir)], outputs, started)
    return 0


def _cmd_train(args, parser) -> int:
    started = time.time()
    _apply_config_file(args, parser)
    data_path = _resolve(args.data)
    out_dir = _resolve(args.out)
    clips = read_clips_jsonl(data_path)
    if not clips:
        print(f"train: no clips in {data_path}", file=sys.stderr)
        return 1
    first = clips[0].frames[0]
    config = ModelConfig(
        d_v=first.vision_feat.size,
        d_u=first.text_feat.size,
        hidden_dim=args.hidden,
        proj_dim=args.proj_dim,
        lambda_=getattr(args, "lambda"),
        n_negatives=args.negatives,
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        pairs_per_clip=args.pairs_per_clip,
        share_heads=args.share_heads,
        seed=args.seed,
    )
    params, trace = train(clips, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoint.bin"
    save_checkpoint(ckpt, params)
    trace_path = out_dir / "loss_trace.csv"
    write_loss_trace(trace_path, trace)
    if trace:
        by_epoch: dict[int, list[float]] = {}
        for row in trace:
            by_epoch.setdefault(row.epoch, []).append(row.loss_total)
        for epoch, losses in sorted(by_epoch.items()):
            print(f"train: epoch {epoch}: mean loss {np.mean(losses):.4f} over {len(losses)} steps")
    _write_manifest(out_dir, "train", asdict(config), args.seed, [data_path], [ckpt, trace_path], started)
    print(f"train: checkpoint -> {ckpt}")
    return 0


def _infer_config(args) -> InferenceConfig:
    return InferenceConfig(
        level_mode=args.mode,
        bsize=args.bsize,
        n_scenes=args.n_scenes,
        n_shots=args.n_shots,
        cluster=ClusterConfig(m=1, max_steps=args.max_cluster_steps, distance=args.cluster_distance),
        seed=args.seed,
    )


def _cmd_infer(args, parser) -> int:
    started = time.time()
    _apply_config_file(args, parser)
    data_path = _resolve(args.data)
    out_path = _resolve(args.out)
    clips = read_clips_jsonl(data_path)
    params = load_checkpoint(_resolve(args.checkpoint))
    cfg = _infer_config(args)

    def run(clip):
        perm, trace = infer_order(clip, params, cfg)
        return clip.clip_id, perm, trace

    if args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, clips))
    else:
        results = [run(c) for c in clips]
    results.sort(key=lambda t: t[0])

    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for clip_id, perm, trace in results:
            record = {
                "clip_id": clip_id,
                "predicted_order": perm.tolist(),
                "path_weights": {
                    "frame": [p.weight for p in trace.frame_paths],
                    "shot": [p.weight for p in trace.shot_paths],
                    "scene": [trace.scene_path.weight] if trace.scene_path else [],
                },
                "scene_partition": trace.scene_partition,
                "shot_partitions": trace.shot_partitions,
            }
            fh.write(json.dumps(record) + "\n")
    _write_manifest(out_path.parent, "infer",
                    {"mode": args.mode, "bsize": args.bsize, "cluster_distance": args.cluster_distance},
                    args.seed, [data_path, args.checkpoint], [out_path], started)
    print(f"infer: {len(results)} predictions -> {out_path}")
    return 0


def _cmd_eval(args, parser) -> int:
    started = time.time()
    _apply_config_file(args, parser)
    data_path = _resolve(args.data)
    clips = read_clips_jsonl(data_path)
    if not clips:
        print(f"eval: no clips in {data_path}", file=sys.stderr)
        return 1
    betas = tuple(int(b) for b in args.betas.split(","))

    predictions: dict[str, np.ndarray] = {}
    if args.pred == "identity":
        for clip in clips:
            predictions[clip.clip_id] = ground_truth_permutation(clip)
    elif args.pred == "random":
        for clip in clips:
            rng = np.random.default_rng(derive_seed(args.seed, f"randpred/{clip.clip_id}"))
            predictions[clip.clip_id] = rng.permutation(clip.n_frames)
    else:
        with open(_resolve(args.pred), "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    predictions[record["clip_id"]] = np.array(record["predicted_order"], dtype=np.int64)

    report = evaluate_split(clips, None, None, betas, split=args.split_name, predictions=predictions)
    out_path = _resolve(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_path, report)
    print(format_table([report]))
    _write_manifest(out_path.parent, "eval", {"betas": betas, "pred": args.pred},
                    args.seed, [data_path], [out_path], started)
    return 0


def _cmd_oracle(args, parser) -> int:
    _apply_config_file(args, parser)
    failures = run_all(seed=args.seed, n_instances=args.seeds)
    if args.out:
        out_path = _resolve(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump([asdict(f) for f in failures], fh, indent=2)
            fh.write("\n")
    if failures:
        for f in failures:
            print(f"oracle: FAIL {f.check}: {f.detail}", file=sys.stderr)
        return 3
    print("oracle: all cross-checks passed")
    return 0


def _cmd_report(args, parser) -> int:
    _apply_config_file(args, parser)
    # eval CSVs end with one aggregate row per beta, keyed by the split name
    summary: dict[tuple[str, str], str] = {}
    for path in args.inputs:
        with open(_resolve(path), "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        n_betas = len({row["beta"] for row in rows})
        for row in rows[-n_betas:]:
            summary[(row["clip_id"], row["beta"])] = row["score"]
    out_path = _resolve(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    betas = sorted({b for (_, b) in summary}, key=int)
    splits = sorted({s for (s, _) in summary})
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["split"] + [f"beta={b}" for b in betas])
        for split in splits:
            writer.writerow([split] + [summary.get((split, b), "") for b in betas])
    print(f"report: {len(splits)} splits x {len(betas)} betas -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clipsort", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"clipsort {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dv", type=int, default=16)
    p.add_argument("--du", type=int, default=8)
    p.add_argument("--drift", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--pair-rate", type=float, default=0.85)
    p.add_argument("--clips-per-movie", type=int, default=10)
    p.add_argument("--ratios", default=",".join(str(r) for r in DEFAULT_RATIOS))
    p.add_argument("--config", help="JSON config file; flags override")
    p.set_defaults(func=_cmd_gen, _parser=p)

    p = sub.add_parser("ingest", help="curate clips from SRT files and frame manifests")
    p.add_argument("--srt-dir", required=True)
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep-gap-ms", type=int, default=5000)
    p.add_argument("--text-dim", type=int, default=32)
    p.add_argument("--ratios", default=",".join(str(r) for r in DEFAULT_RATIOS))
    p.add_argument("--config")
    p.set_defaults(func=_cmd_ingest, _parser=p)

    p = sub.add_parser("train", help="train the order/cluster heads")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lambda", type=float, default=0.75, dest="lambda")
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--proj-dim", type=int, default=64)
    p.add_argument("--negatives", type=int, default=8)
    p.add_argument("--pairs-per-clip", type=int, default=12)
    p.add_argument("--share-heads", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train, _parser=p)

    p = sub.add_parser("infer", help="predict orders for a split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="frame_shot_scene",
                   choices=["frame_only", "frame_shot", "frame_scene", "frame_shot_scene"])
    p.add_argument("--bsize", type=int, default=8)
    p.add_argument("--max-cluster-steps", type=int, default=1000)
    p.add_argument("--cluster-distance", default="euclidean", choices=["euclidean", "cosine"])
    p.add_argument("--n-scenes", type=int, default=None)
    p.add_argument("--n-shots", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_infer, _parser=p)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--pred", required=True, help="predictions JSONL, or 'identity'/'random'")
    p.add_argument("--out", required=True)
    p.add_argument("--betas", default="2,3")
    p.add_argument("--split-name", default="split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_eval, _parser=p)

    p = sub.add_parser("oracle", help="run brute-force cross-checks")
    p.add_argument("--seeds", type=int, default=500, help="random instances per check")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_oracle, _parser=p)

    p = sub.add_parser("report", help="aggregate metric CSVs into one table")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_report, _parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args._parser)
    except OSError as exc:
        print(f"{args.command}: I/O failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
