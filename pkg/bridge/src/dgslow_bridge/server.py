"""FastAPI service speaking the victim wire protocol (version 1).

One request at a time holds the model lock; the service keeps no state between
requests. Schema violations map to 400, oversized payloads to 413, and
out-of-memory to 507 rather than a crash.
"""
from __future__ import annotations

import argparse
import threading

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import BridgeConfig, BridgeModel, BridgeStartupError

PROTOCOL_VERSION = "1"
MAX_PAYLOAD_CHARS = 20000


class TurnRequest(BaseModel):
    persona: list[str] = Field(default_factory=list)
    history: list[str] = Field(default_factory=list)
    utterance: str
    debug: bool = False


class ScoredRequest(TurnRequest):
    reference: str


def _payload_chars(request: TurnRequest) -> int:
    total = len(request.utterance) + sum(len(s) for s in request.persona + request.history)
    if isinstance(request, ScoredRequest):
        total += len(request.reference)
    return total


def create_app(model: BridgeModel) -> FastAPI:
    app = FastAPI(title="dgslow-bridge")
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "schema", "detail": exc.errors()})

    def guarded(request: TurnRequest, fn):
        if _payload_chars(request) > MAX_PAYLOAD_CHARS:
            return JSONResponse(status_code=413, content={"error": "payload too large"})
        try:
            with lock:
                return fn()
        except torch.cuda.OutOfMemoryError:
            return JSONResponse(status_code=507, content={"error": "out of memory"})
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                return JSONResponse(status_code=507, content={"error": "out of memory"})
            raise

    @app.get("/meta")
    def meta():
        return {
            "protocol_version": PROTOCOL_VERSION,
            "model_name": model.name,
            "vocab_size": len(model.tokenizer),
            "embed_dim": model.embed_dim,
            "max_decode_len": model.config.max_decode_len,
        }

    @app.post("/generate")
    def generate(request: TurnRequest):
        def run():
            out = model.generate(request.persona, request.history, request.utterance, debug=request.debug)
            body = {
                "tokens": out.words,
                "text": out.text,
                "steps": out.steps,
                "ended_by_eos": out.ended_by_eos,
            }
            if out.logit_rows is not None:
                body["logit_rows"] = out.logit_rows
            return body

        return guarded(request, run)

    @app.post("/score")
    def score(request: ScoredRequest):
        def run():
            probs = model.score(request.persona, request.history, request.utterance, request.reference)
            return {"token_probs": probs, "tc_sum": float(sum(probs))}

        return guarded(request, run)

    @app.post("/gradients")
    def gradients(request: ScoredRequest):
        def run():
            return model.gradients(
                request.persona, request.history, request.utterance, request.reference, debug=request.debug
            )

        return guarded(request, run)

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dgslow-bridge", description=__doc__)
    parser.add_argument("--model", required=True, help="checkpoint directory or hub id")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-decode-len", type=int, default=24)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    args = parser.parse_args(argv)
    config = BridgeConfig(
        model=args.model,
        device=args.device,
        max_decode_len=args.max_decode_len,
        port=args.port,
        host=args.host,
    )
    try:
        model = BridgeModel(config)
    except BridgeStartupError as exc:
        parser.exit(2, f"error: {exc}\n")
    import uvicorn

    uvicorn.run(create_app(model), host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
