"""FastAPI service wrapping the checker core."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .api import (
    ApiError, CheckRequest, CheckResponse, LintRequest, LintResponse,
    SimulateRequest, SimulateResponse, VcgenRequest, VcgenResponse, run_check,
    run_lint, run_simulate, run_vcgen,
)

app = FastAPI(
    title="scaffcheck",
    version=__version__,
    description="Contract checking, statevector simulation, and "
                "verification-condition emission for Scaffold programs with "
                "ScaffML annotations.",
)


def _fail(exc: ApiError):
    raise HTTPException(status_code=422,
                        detail={"message": exc.message,
                                "diagnostics": exc.diagnostics})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/lint", response_model=LintResponse)
def lint_endpoint(request: LintRequest) -> LintResponse:
    return run_lint(request)


@app.post("/check", response_model=CheckResponse)
def check_endpoint(request: CheckRequest) -> CheckResponse:
    try:
        return run_check(request)
    except ApiError as exc:
        _fail(exc)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(request: SimulateRequest) -> SimulateResponse:
    try:
        return run_simulate(request)
    except ApiError as exc:
        _fail(exc)


@app.post("/vcgen", response_model=VcgenResponse)
def vcgen_endpoint(request: VcgenRequest) -> VcgenResponse:
    try:
        return run_vcgen(request)
    except ApiError as exc:
        _fail(exc)
