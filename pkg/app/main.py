"""
FastAPI service exposing the quaternionic identity checks.

Provides endpoints for:
- Listing registered checks and their defaults
- Running one check with overrides
- Uploading and running a suite file
- Reading the recent report history
"""
import os
from contextlib import asynccontextmanager
from typing import Any, Dict, List, Optional

from fastapi import Body, FastAPI, File, HTTPException, UploadFile
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from pydantic import ValidationError
from rich.console import Console

from app import checks, config
from app.errors import (
    ConfigError,
    FueterCheckError,
    NumericalEvaluationError,
    PreconditionError,
    UnknownCheckError,
)
from app.history import get_report_history
from app.schemas import CheckReport, RunConfig, SuiteSummary

console = Console()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Lifespan event handler for startup and shutdown.
    """
    console.print("=" * 60)
    console.print("Starting Fueter identity check service")
    console.print("=" * 60)

    console.print(f"✓ Registered checks: {len(checks.CHECKS)}")
    try:
        console.print(f"✓ Volume resolution: {config.get_volume_resolution()}")
        console.print(f"✓ Boundary resolution: {config.get_boundary_resolution()}")
        console.print(f"✓ Sphere resolution: {config.get_sphere_resolution()}")
        console.print(f"✓ FD step: {config.get_fd_step()} ({config.get_richardson_levels()} Richardson levels)")
    except ConfigError as e:
        console.print(f"⚠ Invalid configuration: {e}")
    console.print(f"✓ Report history size: {get_report_history().max_size}")
    console.print(f"✓ Server port: {os.getenv('PORT', '8080')}")
    console.print("=" * 60)

    yield

    console.print("\nShutting down...")


app = FastAPI(
    title="Fueter Identity Check API",
    description="Numerical verification of quaternionic integral identities (Fueter and Cullen regularity)",
    version="1.0.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _raise_http(e: Exception):
    if isinstance(e, UnknownCheckError):
        raise HTTPException(status_code=404, detail=str(e))
    if isinstance(e, (ConfigError, PreconditionError, ValidationError)):
        raise HTTPException(status_code=400, detail=str(e))
    if isinstance(e, NumericalEvaluationError):
        raise HTTPException(status_code=500, detail=f"Numerical evaluation failed: {e}")
    raise HTTPException(status_code=500, detail=f"Error running check: {e}")


# ============================================================================
# ENDPOINTS
# ============================================================================

@app.get("/")
def root():
    """Root endpoint with API information."""
    return {
        "name": "Fueter Identity Check API",
        "version": "1.0.0",
        "checks": sorted(checks.CHECKS),
        "endpoints": {
            "list_checks": "GET /api/checks",
            "run_check": "POST /api/checks/{name}",
            "run_suite": "POST /api/suite/upload",
            "reports": "GET /api/reports",
        },
        "docs": "/docs",
    }


@app.get("/api/checks")
def list_checks():
    """Registered checks with the defaults they run with."""
    return [
        {"name": d.name, "description": d.description, "defaults": d.defaults}
        for d in sorted(checks.CHECKS.values(), key=lambda d: d.name)
    ]


@app.post("/api/checks/{name}", response_model=CheckReport, response_model_by_alias=True)
def run_check(name: str, overrides: Optional[Dict[str, Any]] = Body(None)):
    """
    Run one check. The body holds RunConfig fields overriding the defaults;
    reports are never written to disk from the service.
    """
    try:
        checks.get_check(name)
        cfg = RunConfig.model_validate({**(overrides or {}), "check": name, "out": None})
        report = checks.run_check(cfg)
    except (FueterCheckError, ValidationError) as e:
        _raise_http(e)

    get_report_history().add(report)
    return report


@app.post("/api/suite/upload", response_model=SuiteSummary, response_model_by_alias=True)
async def upload_suite(file: UploadFile = File(...), workers: int = 1):
    """
    Upload a suite file (.json) and run every check in it.

    The suite itself runs in the threadpool, off the event loop.
    """
    filename = file.filename or ""
    if not filename.lower().endswith(".json"):
        raise HTTPException(
            status_code=400,
            detail="Invalid file type. Only .json suite files are allowed.",
        )

    content = await file.read()
    try:
        configs = checks.load_suite(content.decode("utf-8"), filename)
        configs = [c.model_copy(update={"out": None}) for c in configs]
        summary = await run_in_threadpool(checks.run_suite_configs, configs, max(1, workers))
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Suite file must be UTF-8 encoded")
    except FueterCheckError as e:
        _raise_http(e)

    get_report_history().extend(summary.reports)
    return summary


@app.get("/api/reports", response_model=List[CheckReport], response_model_by_alias=True)
def recent_reports(check: Optional[str] = None):
    """Most recent reports, newest last, optionally filtered by check name."""
    return get_report_history().get_reports(check)


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("app.main:app", host="0.0.0.0", port=int(os.getenv("PORT", "8080")))
