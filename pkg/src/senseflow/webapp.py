"""HTTP front door: submit requests, inspect engine state, read stream sinks."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .engine import Engine
from .errors import SenseflowError

INSPECT_KINDS = ("sensors", "attributes", "plans", "operators", "subscriptions")


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="senseflow")
    app.state.engine = engine

    @app.exception_handler(SenseflowError)
    async def _senseflow_error(request: Request, exc: SenseflowError):
        return JSONResponse(
            status_code=400, content={"error": exc.code, "message": str(exc)}
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "now_ms": engine.clock.now_ms()}

    @app.post("/requests")
    async def submit(request: Request):
        body = await request.body()
        return engine.submit(body)

    @app.get("/inspect/{kind}")
    async def inspect(kind: str):
        if kind not in INSPECT_KINDS:
            return JSONResponse(
                status_code=404,
                content={"error": "unknown-kind", "message": f"no listing '{kind}'"},
            )
        return engine.inspect(kind)

    @app.get("/subscriptions/{subscription_id}/stream")
    async def stream(subscription_id: str):
        if engine.subscriptions.get(subscription_id) is None:
            return JSONResponse(
                status_code=404,
                content={"error": "unknown-subscription", "message": subscription_id},
            )
        return PlainTextResponse(engine.stream_contents(subscription_id).decode())

    @app.post("/advance/{duration_ms}")
    async def advance(duration_ms: int):
        # only meaningful with a simulated clock; real clocks advance themselves
        engine.run_for(duration_ms)
        return {"now_ms": engine.clock.now_ms()}

    return app
