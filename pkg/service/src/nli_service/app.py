"""HTTP layer: the /nli and /health endpoints over one lazily loaded model."""
from __future__ import annotations

import logging
import threading

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ServiceConfig
from .model import ModelLoadError, NliModel

logger = logging.getLogger("nli_service")


class PairIn(BaseModel):
    premise: str
    hypothesis: str


class NliRequestIn(BaseModel):
    pairs: list[PairIn] = Field(min_length=1)


class ModelHolder:
    """Holds the model once loaded; endpoints answer 503 until then."""

    def __init__(self) -> None:
        self._model: NliModel | None = None
        self._load_error: str | None = None
        self._lock = threading.Lock()

    def load(self, config: ServiceConfig) -> NliModel:
        with self._lock:
            if self._model is None:
                try:
                    self._model = NliModel(config)
                    self._load_error = None
                except ModelLoadError as exc:
                    self._load_error = str(exc)
                    raise
            return self._model

    def get(self) -> NliModel | None:
        with self._lock:
            return self._model

    def describe_unready(self) -> str:
        with self._lock:
            if self._load_error is not None:
                return f"model failed to load: {self._load_error}"
            return "model not loaded"


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": message})


def _unavailable(message: str) -> JSONResponse:
    return JSONResponse(status_code=503, content={"error": message})


def create_app(config: ServiceConfig, holder: ModelHolder | None = None) -> FastAPI:
    """Build the ASGI app; the caller decides when the holder loads."""
    app = FastAPI(title="nli-service", version="0.1.0")
    state = holder if holder is not None else ModelHolder()
    app.state.holder = state
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request, exc: RequestValidationError):
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        return _bad_request(f"{location}: {first.get('msg', 'invalid request')}")

    @app.get("/health")
    def health():
        model = state.get()
        if model is None:
            return _unavailable(state.describe_unready())
        return {"status": "ok", "model": model.model_id}

    # Plain def: FastAPI runs these in a worker thread, so a slow batch
    # never blocks the event loop; the model's own lock serializes
    # inference on the device.
    @app.post("/nli")
    def nli(request: NliRequestIn):
        model = state.get()
        if model is None:
            return _unavailable(state.describe_unready())
        pairs = [(pair.premise, pair.hypothesis) for pair in request.pairs]
        for i, (premise, hypothesis) in enumerate(pairs):
            if not premise.strip() or not hypothesis.strip():
                return _bad_request(f"pairs.{i}: premise and hypothesis must be non-empty")
        return {"results": model.classify(pairs)}

    return app


def _load_in_background(holder: ModelHolder, config: ServiceConfig) -> None:
    try:
        holder.load(config)
    except ModelLoadError:
        # Health keeps reporting the failure; the process stays up so the
        # operator can read it over HTTP instead of digging through logs.
        logger.exception("model load failed")
    else:
        logger.info("model %s ready", config.model_id)


def serve(config: ServiceConfig) -> None:
    """Bind immediately and answer 503 until the checkpoint finishes loading."""
    import uvicorn

    holder = ModelHolder()
    app = create_app(config, holder)
    loader = threading.Thread(
        target=_load_in_background, args=(holder, config), daemon=True
    )
    loader.start()
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
