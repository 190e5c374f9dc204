"""FastAPI service wrapping the core package.

The handler functions (`simulate_payload`, `run_report`, `bench_report`,
`fit_model`, `predict_model`) contain all orchestration and are callable
directly; the CLI uses them in process and the HTTP endpoints are thin
wrappers.  Fitted models live in an in-memory registry keyed by id (single
process; not persisted).
"""

from __future__ import annotations

import os
import uuid
from concurrent.futures import ThreadPoolExecutor

from fastapi import FastAPI, HTTPException

from . import __version__
from .errors import DcpError, InvalidArgumentError, NumericError, SingularDesignError
from .evaluate import holdout_eval, rolling_ts_eval
from .methods import FittedMethod, fit_method
from .schemas import (BenchOut, BenchRequest, DataPayload, FitRequest, FitResponse,
                      HealthResponse, IntervalOut, PredictRequest, PredictResponse,
                      ReportOut, RunConfig, RunRequest, SimulateRequest,
                      SimulateResponse)
from .sim import Dgp, generate

_MODEL_REGISTRY: dict[str, FittedMethod] = {}


def thread_count() -> int:
    """Parallelism cap from the DCP_THREADS environment variable (default 1)."""
    raw = os.environ.get("DCP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def simulate_payload(req: SimulateRequest) -> SimulateResponse:
    data = generate(Dgp(req.dgp, req.seed), req.t)
    columns = ["y"] + [f"x{i + 1}" for i in range(data.n_features)]
    rows = [[float(data.y[i]), *map(float, data.x[i])] for i in range(data.n_obs)]
    return SimulateResponse(columns=columns, rows=rows,
                            time_ordered=data.time_ordered)


def run_report(req: RunRequest) -> ReportOut:
    config = req.config
    time_ordered = config.time_ordered or req.data.time_ordered
    data = req.data.to_dataset(time_ordered=time_ordered)
    cfg = config.to_method_config(config.method)
    if time_ordered:
        _, pooled = rolling_ts_eval(data, cfg, n_bins=config.n_bins)
        n_train = 5 * (data.n_obs // 10)
        return ReportOut.from_report(pooled, config, n_train)
    report, n_train = holdout_eval(data, cfg, n_bins=config.n_bins)
    return ReportOut.from_report(report, config, n_train)


def bench_report(req: BenchRequest) -> BenchOut:
    requests = [RunRequest(config=RunConfig(method=m, **req.config.model_dump()),
                           data=req.data)
                for m in req.methods]
    workers = min(thread_count(), len(requests))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run_report, requests))
    else:
        entries = [run_report(r) for r in requests]
    entries.sort(key=lambda e: (e.avg_length is None,
                                e.avg_length if e.avg_length is not None else 0.0))
    return BenchOut(entries=entries)


def fit_model(req: FitRequest) -> FitResponse:
    config = req.config
    time_ordered = config.time_ordered or req.data.time_ordered
    data = req.data.to_dataset(time_ordered=time_ordered)
    cfg = config.to_method_config(config.method)
    fitted = fit_method(cfg, data)
    model_id = uuid.uuid4().hex
    _MODEL_REGISTRY[model_id] = fitted
    threshold = fitted.threshold
    infinite = threshold is not None and threshold == float("inf")
    n_fit, n_cal = fitted.split_sizes
    return FitResponse(model_id=model_id, method=config.method,
                       threshold=None if (threshold is None or infinite) else threshold,
                       threshold_infinite=infinite, n_fit=n_fit, n_calibration=n_cal)


def predict_model(model_id: str, req: PredictRequest) -> PredictResponse:
    fitted = _MODEL_REGISTRY.get(model_id)
    if fitted is None:
        raise KeyError(model_id)
    intervals = fitted.predict(req.x)
    return PredictResponse(intervals=[IntervalOut.from_interval(iv) for iv in intervals])


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------

app = FastAPI(title="dcp", version=__version__,
              description="Conditional prediction intervals as a service: "
                          "rank-based conformal methods, comparators, and "
                          "coverage evaluation.")


def _http_guard(fn, *args):
    try:
        return fn(*args)
    except (InvalidArgumentError,) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except KeyError as exc:
        raise HTTPException(status_code=404, detail=f"unknown model {exc}") from exc
    except (SingularDesignError, NumericError) as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    except DcpError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
    return _http_guard(simulate_payload, req)


@app.post("/run", response_model=ReportOut)
def run_endpoint(req: RunRequest) -> ReportOut:
    return _http_guard(run_report, req)


@app.post("/bench", response_model=BenchOut)
def bench_endpoint(req: BenchRequest) -> BenchOut:
    return _http_guard(bench_report, req)


@app.post("/models", response_model=FitResponse)
def fit_endpoint(req: FitRequest) -> FitResponse:
    return _http_guard(fit_model, req)


@app.post("/models/{model_id}/predict", response_model=PredictResponse)
def predict_endpoint(model_id: str, req: PredictRequest) -> PredictResponse:
    return _http_guard(predict_model, model_id, req)


@app.delete("/models/{model_id}")
def delete_endpoint(model_id: str) -> dict:
    if model_id not in _MODEL_REGISTRY:
        raise HTTPException(status_code=404, detail=f"unknown model {model_id}")
    del _MODEL_REGISTRY[model_id]
    return {"deleted": model_id}


__all__ = ["app", "simulate_payload", "run_report", "bench_report",
           "fit_model", "predict_model", "thread_count", "DataPayload"]
