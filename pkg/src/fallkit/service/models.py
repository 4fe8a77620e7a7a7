"""Request/response schemas for the service endpoints.

Operations work on filesystem paths (corpora are file trees); requests
carry paths plus parameters, responses carry summary numbers and the
paths of anything written.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class SynthRequest(BaseModel):
    out_dir: str
    count: int = 40
    width: int = 160
    height: int = 120
    fps: float = 30.0
    frames_min: int = 30
    frames_max: int = 40
    fall_fraction: float = Field(0.5, ge=0.0, le=1.0)
    seed: int = 0


class SynthResponse(BaseModel):
    manifest: str
    videos: int
    fall_videos: int


class AugmentRequest(BaseModel):
    manifest: str
    mode: str = "dynamic"  # dynamic | constant
    seed: int = 0
    variants: int = 10  # constant mode: variants per video
    padding: int | None = None


class AugmentResponse(BaseModel):
    written: int
    skipped: list[str] = []
    manifest: str


class SegmentRequest(BaseModel):
    manifest: str
    seed: int = 0
    segment_len: int = 4
    sampling_rate: int = 1
    stride: int = 4
    out_splits: str
    out_segments: str


class SegmentResponse(BaseModel):
    splits: str
    segments: str
    per_split: dict[str, int]
    per_label: dict[str, int]


class ExtractRequest(BaseModel):
    manifest: str
    splits: str
    out_dir: str
    segment_len: int = 4
    sampling_rate: int = 1
    stride: int = 4
    resolution: str = "64x48"
    pos_step: int = 4
    scales: str = "8,16,32"


class ExtractResponse(BaseModel):
    bank: str
    bank_checksum: str
    bank_size: int
    rows: dict[str, int]
    features: dict[str, str]
    seconds: float


class TrainRequest(BaseModel):
    features: str  # train-split feature matrix
    bank: str
    out_dir: str = ""  # empty: timestamped directory under ./runs
    lam: float = Field(0.6, ge=0.0, le=1.0, alias="lambda")
    rounds: int = Field(300, alias="features_k")
    svm_c: float = 1.0
    config_copy: str = ""  # config text to store with the run

    model_config = {"populate_by_name": True}


class TrainResponse(BaseModel):
    pipeline_dir: str
    rounds: int
    selected: int
    train_accuracy: float
    boost_seconds: float
    svm_seconds: float
    n_normal: int
    n_occluded: int


class EvalRequest(BaseModel):
    pipeline_dir: str
    features: str


class MetricRow(BaseModel):
    slice: str
    n: int
    accuracy: float
    recall: float | None
    precision: float | None
    tp: int
    fp: int
    tn: int
    fn: int


class EvalResponse(BaseModel):
    rows: list[MetricRow]
    text: str


class SweepLambdaRequest(BaseModel):
    features_train: str
    features_val: str
    bank: str
    grid: list[float] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    rounds: int = 300
    svm_c: float = 1.0


class SweepLambdaResponse(BaseModel):
    rows: list[dict]


class SweepFeaturesRequest(BaseModel):
    features_train: str
    features_eval: str
    bank: str
    grid: list[int] = [10, 100, 200, 300, 400]
    lam: float = Field(0.6, alias="lambda")
    svm_c: float = 1.0

    model_config = {"populate_by_name": True}


class SweepFeaturesResponse(BaseModel):
    rows: list[dict]


class BenchRequest(BaseModel):
    pipeline_dir: str
    manifest: str
    splits: str = ""  # restrict to the test split when given
    segment_len: int = 4
    sampling_rate: int = 1
    stride: int = 4
    max_segments: int = 300


class BenchResponse(BaseModel):
    segments: int
    median_ms_per_frame: float
    p95_ms_per_frame: float
    total_seconds: float


class PcaRequest(BaseModel):
    features: str
    out_csv: str


class PcaResponse(BaseModel):
    out_csv: str
    variances: list[float]
    ratios: list[float]
