"""Endpoint implementations: one function per operation.

These are plain functions over the request/response models so the CLI can
call them in-process and the FastAPI app can route to them unchanged.
"""

from __future__ import annotations

import time
from datetime import datetime
from pathlib import Path

import numpy as np

from .. import evaluation, occlusion, synth, trainer
from ..corpus import (
    ORIGIN_NORMAL,
    append_manifest,
    load_manifest,
    load_record,
    write_record,
)
from ..haar import (
    FilterBank,
    enumerate_filters,
    load_bank,
    load_feature_matrix,
    save_bank,
    save_feature_matrix,
)
from ..segmentation import (
    MODE_TEST,
    MODE_TRAIN,
    SPLIT_TEST,
    SegmentParams,
    assert_split_hygiene,
    assign_splits,
    load_splits,
    save_splits,
    segment_indices,
    segment_video,
)
from . import models as m


def synth_op(req: m.SynthRequest) -> m.SynthResponse:
    spec = synth.SynthCorpusSpec(
        count=req.count,
        width=req.width,
        height=req.height,
        fps=req.fps,
        frames_min=req.frames_min,
        frames_max=req.frames_max,
        fall_fraction=req.fall_fraction,
        seed=req.seed,
    )
    manifest, entries = synth.generate_synth_corpus(spec, req.out_dir)
    falls = sum(1 for e in entries if e.fall_start is not None)
    return m.SynthResponse(manifest=str(manifest), videos=len(entries), fall_videos=falls)


def augment_op(req: m.AugmentRequest) -> m.AugmentResponse:
    if req.mode not in ("dynamic", "constant"):
        raise ValueError(f"unknown augmentation mode {req.mode!r}")
    manifest_path = Path(req.manifest)
    entries = load_manifest(manifest_path)
    if any(e.origin != ORIGIN_NORMAL for e in entries):
        raise ValueError("manifest already contains occluded records; augment once per corpus")
    root = manifest_path.parent
    written = 0
    skipped: list[str] = []
    new_entries = []
    for entry in entries:
        record = load_record(entry)
        if req.mode == "dynamic":
            variants, missed = occlusion.augment_video(record, req.seed, padding=req.padding)
            skipped.extend(f"{entry.video_id}:{name}" for name in missed)
        else:
            variants = occlusion.constant_variants(record, req.seed, count=req.variants)
        for v in variants:
            new_entries.append(write_record(root, v))
            written += 1
    append_manifest(new_entries, manifest_path)
    return m.AugmentResponse(written=written, skipped=skipped, manifest=str(manifest_path))


def _params(req) -> SegmentParams:
    return SegmentParams(req.segment_len, req.sampling_rate, req.stride)


def segment_op(req: m.SegmentRequest) -> m.SegmentResponse:
    entries = load_manifest(req.manifest)
    splits = assign_splits(entries, req.seed)
    assert_split_hygiene(entries, splits)
    save_splits(splits, req.out_splits)
    params = _params(req)
    per_split: dict[str, int] = {}
    per_label: dict[str, int] = {}
    lines = []
    for entry in entries:
        split = splits[entry.video_id]
        mode = MODE_TRAIN if split == "train" else MODE_TEST
        record = load_record(entry)
        for seg in segment_video(record, params, mode):
            indices = ",".join(str(i) for i in seg.frame_indices)
            lines.append(f"{seg.video_id}\t{split}\t{seg.label}\t{seg.origin}\t{indices}")
            per_split[split] = per_split.get(split, 0) + 1
            per_label[seg.label] = per_label.get(seg.label, 0) + 1
    out_segments = Path(req.out_segments)
    out_segments.parent.mkdir(parents=True, exist_ok=True)
    out_segments.write_text("".join(line + "\n" for line in lines))
    return m.SegmentResponse(
        splits=req.out_splits, segments=req.out_segments, per_split=per_split, per_label=per_label
    )


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"bad resolution {text!r}, expected WxH") from None
    return w, h


def extract_op(req: m.ExtractRequest) -> m.ExtractResponse:
    t0 = time.perf_counter()
    entries = load_manifest(req.manifest)
    splits = load_splits(req.splits)
    assert_split_hygiene(entries, splits)
    width, height = _parse_resolution(req.resolution)
    scales = tuple(int(s) for s in req.scales.split(","))
    bank = FilterBank(width, height, tuple(enumerate_filters(width, height, req.pos_step, scales)))
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bank_path = out_dir / "bank.txt"
    save_bank(bank, bank_path)
    params = _params(req)
    rows: dict[str, int] = {}
    features: dict[str, str] = {}
    for split in ("train", "val", "test"):
        members = [e for e in entries if splits.get(e.video_id) == split]
        mode = MODE_TRAIN if split == "train" else MODE_TEST
        ds = trainer.extract_dataset((load_record(e) for e in members), bank, params, mode)
        path = out_dir / f"features_{split}.bin"
        save_feature_matrix(path, ds.X, ds.meta, bank.checksum)
        rows[split] = len(ds)
        features[split] = str(path)
    return m.ExtractResponse(
        bank=str(bank_path),
        bank_checksum=bank.checksum,
        bank_size=len(bank),
        rows=rows,
        features=features,
        seconds=time.perf_counter() - t0,
    )


def _load_dataset(path: str) -> trainer.FeatureDataset:
    X, meta, checksum = load_feature_matrix(path)
    return trainer.dataset_from_matrix(X, meta, checksum)


def train_op(req: m.TrainRequest) -> m.TrainResponse:
    train_ds = _load_dataset(req.features)
    bank = load_bank(req.bank)
    if train_ds.bank_checksum and train_ds.bank_checksum != bank.checksum:
        raise ValueError("feature matrix was extracted with a different bank")
    out_dir = Path(req.out_dir) if req.out_dir else Path("runs") / datetime.now().strftime(
        "run-%Y%m%d-%H%M%S"
    )
    policy = train_ds.policy(req.lam)
    pipeline, report = trainer.train_pipeline(
        train_ds, policy, req.rounds, req.svm_c, work_size=(bank.width, bank.height)
    )
    trainer.save_pipeline(pipeline, out_dir, bank)
    config = req.config_copy or "\n".join(
        [
            f"features={req.features}",
            f"bank={req.bank}",
            f"lambda={req.lam}",
            f"features_k={req.rounds}",
            f"svm_c={req.svm_c}",
        ]
    )
    (out_dir / "config.txt").write_text(config + "\n")
    return m.TrainResponse(
        pipeline_dir=str(out_dir),
        rounds=report.rounds,
        selected=report.selected_count,
        train_accuracy=report.train_accuracy,
        boost_seconds=report.boost_seconds,
        svm_seconds=report.svm_seconds,
        n_normal=report.n_normal,
        n_occluded=report.n_occluded,
    )


def _metric_rows(report: evaluation.EvalReport) -> list[m.MetricRow]:
    rows = [("overall", report.overall)] + sorted(report.per_origin.items())
    return [
        m.MetricRow(
            slice=name,
            n=s.total,
            accuracy=s.accuracy,
            recall=s.recall,
            precision=s.precision,
            tp=s.tp,
            fp=s.fp,
            tn=s.tn,
            fn=s.fn,
        )
        for name, s in rows
    ]


def eval_op(req: m.EvalRequest) -> m.EvalResponse:
    pipeline, _ = trainer.load_pipeline(req.pipeline_dir)
    ds = _load_dataset(req.features)
    if pipeline.bank_checksum and ds.bank_checksum and pipeline.bank_checksum != ds.bank_checksum:
        raise ValueError("pipeline and feature matrix use different banks")
    report = evaluation.evaluate(pipeline, ds)
    return m.EvalResponse(rows=_metric_rows(report), text=report.to_text())


def sweep_lambda_op(req: m.SweepLambdaRequest) -> m.SweepLambdaResponse:
    train_ds = _load_dataset(req.features_train)
    val_ds = _load_dataset(req.features_val)
    rows = trainer.lambda_sweep(train_ds, val_ds, req.grid, req.rounds, req.svm_c)
    return m.SweepLambdaResponse(rows=rows)


def sweep_features_op(req: m.SweepFeaturesRequest) -> m.SweepFeaturesResponse:
    train_ds = _load_dataset(req.features_train)
    eval_ds = _load_dataset(req.features_eval)
    rows = trainer.sweep_features(train_ds, eval_ds, req.grid, req.lam, req.svm_c)
    return m.SweepFeaturesResponse(rows=rows)


def bench_op(req: m.BenchRequest) -> m.BenchResponse:
    pipeline, bank = trainer.load_pipeline(req.pipeline_dir)
    if bank is None:
        raise ValueError(f"{req.pipeline_dir}: no bank.txt stored with the pipeline")
    entries = load_manifest(req.manifest)
    if req.splits:
        splits = load_splits(req.splits)
        entries = [e for e in entries if splits.get(e.video_id) == SPLIT_TEST]
    params = _params(req)
    windows = []
    for entry in entries:
        if len(windows) >= req.max_segments:
            break
        record = load_record(entry)
        frames = record.frames.frames
        for window in segment_indices(len(frames), params):
            windows.append(frames[window])
            if len(windows) >= req.max_segments:
                break
    stats = evaluation.benchmark(pipeline, bank, windows)
    return m.BenchResponse(
        segments=stats.n_segments,
        median_ms_per_frame=stats.median_ms_per_frame,
        p95_ms_per_frame=stats.p95_ms_per_frame,
        total_seconds=stats.total_seconds,
    )


def pca_op(req: m.PcaRequest) -> m.PcaResponse:
    X, meta, _ = load_feature_matrix(req.features)
    result = evaluation.pca_project_2d(np.asarray(X))
    evaluation.write_pca_csv(
        req.out_csv, result, labels=[r[1] for r in meta], origins=[r[2] for r in meta]
    )
    return m.PcaResponse(
        out_csv=req.out_csv,
        variances=[float(v) for v in result.variances],
        ratios=[float(r) for r in result.ratios],
    )
