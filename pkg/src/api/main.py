"""FastAPI application exposing completion and automaton operations"""

from typing import List, Optional

import structlog
from fastapi import FastAPI, HTTPException, Path
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, ValidationError

from src import __version__
from src.analytics.completion import check_reachability, complete
from src.analytics.oracle import peano_benchmark
from src.config import get_settings
from src.ingestion.serializer import format_automaton
from src.ingestion.spec_loader import parse_spec_text, parse_term
from src.models.errors import LTAError
from src.models.lattice import Partition
from src.processing.automaton_ops import member
from src.processing.partitioned import determinize, minimize, to_plta

logger = structlog.get_logger()

app = FastAPI(
    title="Lattice Tree Automata API",
    description="Completion, membership and determinization over lattice tree automata",
    version=__version__,
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:3000", "http://localhost:5173"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models
class CompletionOptions(BaseModel):
    spec: str
    automaton: Optional[str] = None
    trs: Optional[str] = None
    equations: Optional[str] = None
    max_steps: Optional[int] = Field(default=None, ge=1)
    widen_after: Optional[int] = Field(default=None, ge=0)
    strict_int: Optional[bool] = None


class CompleteResponse(BaseModel):
    converged: bool
    steps: int
    automaton: str
    trace: List[str]


class MemberRequest(BaseModel):
    spec: str
    automaton: Optional[str] = None
    term: str


class CheckRequest(CompletionOptions):
    bad: str


class CheckResponse(BaseModel):
    verdict: str
    converged: bool
    witness: Optional[str] = None


class DeterminizeRequest(BaseModel):
    spec: str
    automaton: Optional[str] = None
    partition: Optional[str] = None
    minimize: bool = False


class PeanoResponse(BaseModel):
    peano_steps: int
    builtin_steps: int
    peano_value: int
    builtin_value: int


def _failure(event: str, e: Exception) -> HTTPException:
    logger.error(event, err=str(e))
    if isinstance(e, LTAError):
        return HTTPException(status_code=400, detail=str(e))
    if isinstance(e, ValidationError):
        return HTTPException(status_code=422, detail=str(e))
    return HTTPException(status_code=500, detail=str(e))


@app.get("/")
def root():
    """Root endpoint"""
    return {
        "service": "Lattice Tree Automata API",
        "version": __version__,
        "endpoints": ["/health", "/complete", "/member", "/check", "/determinize", "/bench/peano/{x}/{y}"],
    }


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/complete", response_model=CompleteResponse)
def run_completion(request: CompletionOptions):
    """
    Complete the initial automaton of a spec with its rewrite system

    Args:
        request: Spec text plus optional names and completion overrides

    Returns:
        Convergence flag, step count, the completed automaton in spec syntax and the trace
    """
    try:
        spec = parse_spec_text(request.spec)
        cfg = spec.completion_config(
            get_settings(),
            equations=request.equations,
            max_steps=request.max_steps,
            widen_after=request.widen_after,
            strict_int=request.strict_int,
        )
        logger.info("Completion requested", automaton=request.automaton, max_steps=cfg.max_steps)
        result = complete(spec.automaton(request.automaton), spec.trs(request.trs), cfg)
        return CompleteResponse(
            converged=result.converged,
            steps=result.steps,
            automaton=format_automaton(result.automaton, "completed"),
            trace=result.trace_lines(),
        )
    except Exception as e:
        raise _failure("Completion failed", e)


@app.post("/member")
def check_member(request: MemberRequest):
    try:
        a = parse_spec_text(request.spec).automaton(request.automaton)
        return {"member": member(parse_term(request.term, a.alphabet), a)}
    except Exception as e:
        raise _failure("Membership test failed", e)


@app.post("/check", response_model=CheckResponse)
def check_safety(request: CheckRequest):
    """Reachability check of the bad automaton against the completed initial automaton"""
    try:
        spec = parse_spec_text(request.spec)
        cfg = spec.completion_config(
            get_settings(),
            equations=request.equations,
            max_steps=request.max_steps,
            widen_after=request.widen_after,
            strict_int=request.strict_int,
        )
        verdict = check_reachability(
            spec.automaton(request.automaton), spec.automaton(request.bad), spec.trs(request.trs), cfg
        )
        return CheckResponse(
            verdict=verdict.kind.value,
            converged=verdict.result.converged,
            witness=None if verdict.witness is None else str(verdict.witness),
        )
    except Exception as e:
        raise _failure("Reachability check failed", e)


@app.post("/determinize")
def run_determinize(request: DeterminizeRequest):
    try:
        spec = parse_spec_text(request.spec)
        if request.partition is not None:
            partition = Partition.parse(request.partition)
        else:
            partition = spec.partition or Partition.trivial()
        result = determinize(to_plta(spec.automaton(request.automaton), partition))
        if request.minimize:
            result = minimize(result)
        logger.info("Determinized automaton", states=len(result.base.states))
        return {"automaton": format_automaton(result.base, "determinized", partition)}
    except Exception as e:
        raise _failure("Determinization failed", e)


@app.get("/bench/peano/{x}/{y}", response_model=PeanoResponse)
def bench_peano(x: int = Path(..., ge=0), y: int = Path(..., ge=0)):
    """Rewrite steps of unary addition against one builtin evaluation"""
    try:
        report = peano_benchmark(x, y)
        return PeanoResponse(
            peano_steps=report.peano_steps,
            builtin_steps=report.builtin_steps,
            peano_value=report.peano_value,
            builtin_value=report.builtin_value,
        )
    except Exception as e:
        raise _failure("Peano benchmark failed", e)


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
