"""Command-line client for the toolkit service.

Every subcommand builds a service request model and dispatches it either
in-process (default) or to a running server (``--server URL``), then
renders the response as text. ``--config FILE`` loads key=value pairs
that override the command-line flags.

Exit codes: 0 success, 2 validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import ValidationError

from .corpus import CorpusError
from .service import models as m
from .trainer import parse_config

_COMMANDS = {
    "synth": ("/synth", m.SynthRequest),
    "augment": ("/augment", m.AugmentRequest),
    "segment": ("/segment", m.SegmentRequest),
    "extract": ("/extract", m.ExtractRequest),
    "train": ("/train", m.TrainRequest),
    "eval": ("/eval", m.EvalRequest),
    "sweep-lambda": ("/sweep-lambda", m.SweepLambdaRequest),
    "sweep-features": ("/sweep-features", m.SweepFeaturesRequest),
    "bench": ("/bench", m.BenchRequest),
    "pca": ("/pca", m.PcaRequest),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fallkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file overriding flags")
        p.add_argument("--server", help="service base URL (default: run in-process)")
        return p

    p = add("synth", "generate a synthetic stick-figure corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames-min", type=int, default=30)
    p.add_argument("--frames-max", type=int, default=40)
    p.add_argument("--fall-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)

    p = add("augment", "append occluded variants to a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["dynamic", "constant"], default="dynamic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", type=int, default=10)
    p.add_argument("--padding", type=int, default=None)

    p = add("segment", "assign splits and list labeled windows")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segment-len", type=int, default=4)
    p.add_argument("--sampling-rate", type=int, default=1)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--out-splits", required=True)
    p.add_argument("--out-segments", required=True)

    p = add("extract", "build the filter bank and per-split feature matrices")
    p.add_argument("--manifest", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--segment-len", type=int, default=4)
    p.add_argument("--sampling-rate", type=int, default=1)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--resolution", default="64x48")
    p.add_argument("--pos-step", type=int, default=4)
    p.add_argument("--scales", default="8,16,32")

    p = add("train", "weighted AdaBoost + SVM training")
    p.add_argument("--matrix", required=True, help="train-split feature matrix")
    p.add_argument("--bank", required=True)
    p.add_argument("--out-dir", default="")
    p.add_argument("--lambda", dest="lam", type=float, default=0.6)
    p.add_argument("--features", dest="rounds", type=int, default=300, help="boosting rounds K")
    p.add_argument("--svm-c", type=float, default=1.0)

    p = add("eval", "evaluate a trained pipeline on a feature matrix")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--matrix", required=True)

    p = add("sweep-lambda", "train/validate over a grid of lambda values")
    p.add_argument("--train-matrix", required=True)
    p.add_argument("--val-matrix", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--features", dest="rounds", type=int, default=300)
    p.add_argument("--svm-c", type=float, default=1.0)

    p = add("sweep-features", "accuracy/cost trade-off over feature counts")
    p.add_argument("--train-matrix", required=True)
    p.add_argument("--eval-matrix", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--grid", default="10,100,200,300,400")
    p.add_argument("--lambda", dest="lam", type=float, default=0.6)
    p.add_argument("--svm-c", type=float, default=1.0)

    p = add("bench", "per-frame timing of extraction + classification")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--splits", default="")
    p.add_argument("--segment-len", type=int, default=4)
    p.add_argument("--sampling-rate", type=int, default=1)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--max-segments", type=int, default=300)

    p = add("pca", "2-D PCA projection of a feature matrix to CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out-csv", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _request_payload(args: argparse.Namespace) -> dict:
    payload = {
        "synth": lambda a: {
            "out_dir": a.out_dir,
            "count": a.count,
            "width": a.width,
            "height": a.height,
            "fps": a.fps,
            "frames_min": a.frames_min,
            "frames_max": a.frames_max,
            "fall_fraction": a.fall_fraction,
            "seed": a.seed,
        },
        "augment": lambda a: {
            "manifest": a.manifest,
            "mode": a.mode,
            "seed": a.seed,
            "variants": a.variants,
            "padding": a.padding,
        },
        "segment": lambda a: {
            "manifest": a.manifest,
            "seed": a.seed,
            "segment_len": a.segment_len,
            "sampling_rate": a.sampling_rate,
            "stride": a.stride,
            "out_splits": a.out_splits,
            "out_segments": a.out_segments,
        },
        "extract": lambda a: {
            "manifest": a.manifest,
            "splits": a.splits,
            "out_dir": a.out_dir,
            "segment_len": a.segment_len,
            "sampling_rate": a.sampling_rate,
            "stride": a.stride,
            "resolution": a.resolution,
            "pos_step": a.pos_step,
            "scales": a.scales,
        },
        "train": lambda a: {
            "features": a.matrix,
            "bank": a.bank,
            "out_dir": a.out_dir,
            "lam": a.lam,
            "rounds": a.rounds,
            "svm_c": a.svm_c,
        },
        "eval": lambda a: {"pipeline_dir": a.pipeline, "features": a.matrix},
        "sweep-lambda": lambda a: {
            "features_train": a.train_matrix,
            "features_val": a.val_matrix,
            "bank": a.bank,
            "grid": [float(v) for v in a.grid.split(",")],
            "rounds": a.rounds,
            "svm_c": a.svm_c,
        },
        "sweep-features": lambda a: {
            "features_train": a.train_matrix,
            "features_eval": a.eval_matrix,
            "bank": a.bank,
            "grid": [int(v) for v in a.grid.split(",")],
            "lam": a.lam,
            "svm_c": a.svm_c,
        },
        "bench": lambda a: {
            "pipeline_dir": a.pipeline,
            "manifest": a.manifest,
            "splits": a.splits,
            "segment_len": a.segment_len,
            "sampling_rate": a.sampling_rate,
            "stride": a.stride,
            "max_segments": a.max_segments,
        },
        "pca": lambda a: {"features": a.matrix, "out_csv": a.out_csv},
    }[args.command](args)
    return payload


_CONFIG_KEYS = {  # config-file key -> request field (flags use the same names)
    "lambda": "lam",
    "features": "rounds",
    "features-k": "rounds",
    "svm-c": "svm_c",
    "out-dir": "out_dir",
    "out-splits": "out_splits",
    "out-segments": "out_segments",
    "segment-len": "segment_len",
    "sampling-rate": "sampling_rate",
    "pos-step": "pos_step",
    "frames-min": "frames_min",
    "frames-max": "frames_max",
    "fall-fraction": "fall_fraction",
    "max-segments": "max_segments",
    "train-matrix": "features_train",
    "val-matrix": "features_val",
    "eval-matrix": "features_eval",
    "out-csv": "out_csv",
}


def _apply_config(payload: dict, config_path: str) -> dict:
    overrides = parse_config(config_path)
    for key, value in overrides.items():
        field = _CONFIG_KEYS.get(key, key.replace("-", "_"))
        if field == "matrix":
            field = "features"
        if field == "pipeline":
            field = "pipeline_dir"
        if field not in payload:
            raise ValueError(f"config key {key!r} does not apply to this command")
        if isinstance(payload[field], list):
            caster = float if payload[field] and isinstance(payload[field][0], float) else int
            payload[field] = [caster(v) for v in value.split(",")]
        else:
            payload[field] = value
    return payload


def _send(path: str, request_model, server: str | None):
    if server is None:
        from .service import ops

        fn = {
            "/synth": ops.synth_op,
            "/augment": ops.augment_op,
            "/segment": ops.segment_op,
            "/extract": ops.extract_op,
            "/train": ops.train_op,
            "/eval": ops.eval_op,
            "/sweep-lambda": ops.sweep_lambda_op,
            "/sweep-features": ops.sweep_features_op,
            "/bench": ops.bench_op,
            "/pca": ops.pca_op,
        }[path]
        return fn(request_model).model_dump()

    import httpx

    response = httpx.post(
        server.rstrip("/") + path, json=request_model.model_dump(), timeout=None
    )
    if response.status_code in (400, 422):
        raise ValueError(response.text)
    response.raise_for_status()
    return response.json()


def _print_response(command: str, data: dict):
    if command == "eval":
        print(data["text"])
        print()
        if data["rows"]:
            print(",".join(data["rows"][0].keys()))
        for row in data["rows"]:
            fields = [str(row[k]) if row[k] is not None else "" for k in row]
            print(",".join(fields))
        return
    if command in ("sweep-lambda", "sweep-features"):
        rows = data["rows"]
        if rows:
            keys = list(rows[0].keys())
            widths = [max(len(k), 12) for k in keys]
            print("  ".join(k.rjust(w) for k, w in zip(keys, widths)))
            for row in rows:
                print(
                    "  ".join(
                        (f"{row[k]:.4f}" if isinstance(row[k], float) else str(row[k])).rjust(w)
                        for k, w in zip(keys, widths)
                    )
                )
            print()
            print(",".join(keys))
            for row in rows:
                print(",".join(str(row[k]) for k in keys))
        return
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value)
        print(f"{key}: {value}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    path, model_cls = _COMMANDS[args.command]
    try:
        payload = _request_payload(args)
        if args.config:
            payload = _apply_config(payload, args.config)
        request_model = model_cls.model_validate(payload)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        data = _send(path, request_model, args.server)
    except (ValidationError, ValueError, CorpusError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_response(args.command, data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
