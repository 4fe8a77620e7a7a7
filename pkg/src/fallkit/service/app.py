"""FastAPI application: one POST endpoint per toolkit operation.

Validation problems (bad paths, malformed corpora, inconsistent
checksums) map to HTTP 400; schema violations are FastAPI's usual 422.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..corpus import CorpusError
from . import models as m
from . import ops


def create_app() -> FastAPI:
    app = FastAPI(title="fallkit", version="0.1.0")

    def guarded(fn, req):
        try:
            return fn(req)
        except (ValueError, CorpusError, FileNotFoundError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/synth", response_model=m.SynthResponse)
    def synth(req: m.SynthRequest):
        return guarded(ops.synth_op, req)

    @app.post("/augment", response_model=m.AugmentResponse)
    def augment(req: m.AugmentRequest):
        return guarded(ops.augment_op, req)

    @app.post("/segment", response_model=m.SegmentResponse)
    def segment(req: m.SegmentRequest):
        return guarded(ops.segment_op, req)

    @app.post("/extract", response_model=m.ExtractResponse)
    def extract(req: m.ExtractRequest):
        return guarded(ops.extract_op, req)

    @app.post("/train", response_model=m.TrainResponse)
    def train(req: m.TrainRequest):
        return guarded(ops.train_op, req)

    @app.post("/eval", response_model=m.EvalResponse)
    def evaluate(req: m.EvalRequest):
        return guarded(ops.eval_op, req)

    @app.post("/sweep-lambda", response_model=m.SweepLambdaResponse)
    def sweep_lambda(req: m.SweepLambdaRequest):
        return guarded(ops.sweep_lambda_op, req)

    @app.post("/sweep-features", response_model=m.SweepFeaturesResponse)
    def sweep_features(req: m.SweepFeaturesRequest):
        return guarded(ops.sweep_features_op, req)

    @app.post("/bench", response_model=m.BenchResponse)
    def bench(req: m.BenchRequest):
        return guarded(ops.bench_op, req)

    @app.post("/pca", response_model=m.PcaResponse)
    def pca(req: m.PcaRequest):
        return guarded(ops.pca_op, req)

    return app
