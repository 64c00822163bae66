"""FastAPI application exposing the regard classifier.

The model path comes from the REGARD_MODEL_PATH environment variable (or
the create_app argument). Until the model finishes loading every endpoint
answers 503; malformed or out-of-bound requests answer 400.
"""
from __future__ import annotations

import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .classifier import RegardClassifier

BATCH_LIMIT = 64


class ScoreRequest(BaseModel):
    texts: list[str] = Field(min_length=1, max_length=BATCH_LIMIT)


def create_app(model_path: str | None = None) -> FastAPI:
    path = model_path or os.environ.get("REGARD_MODEL_PATH")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if path is None:
            raise RuntimeError("set REGARD_MODEL_PATH to the classifier checkpoint")
        app.state.classifier = RegardClassifier(path)
        yield

    app = FastAPI(title="regard-service", lifespan=lifespan)
    app.state.classifier = None

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        # the wire contract promises 400 for malformed bodies and bounds
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz")
    async def healthz():
        if app.state.classifier is None:
            return PlainTextResponse("loading", status_code=503)
        return PlainTextResponse("ok")

    @app.post("/v1/regard")
    async def score(request: ScoreRequest):
        classifier = app.state.classifier
        if classifier is None:
            return JSONResponse(status_code=503, content={"detail": "model not ready"})
        return {"results": classifier.score_batch(request.texts)}

    return app
