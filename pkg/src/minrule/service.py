"""HTTP facade over the simulator: validate, run, sweep, bounds, presets.

The endpoints wrap the harness functions 1:1 and never touch the filesystem;
clients decide what to persist. Error payloads carry a `kind` field
("validation" | "invariant" | "protocol") that the CLI maps onto exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .errors import ConfigError, InvariantBreach, ModelViolation, ProtocolViolation
from .harness import (
    bounds_report,
    render_beliefs_csv,
    render_events_csv,
    render_messages_csv,
    resolve_scenario,
    run_scenario,
    sweep_scenario,
)
from .scenario import preset_list

app = FastAPI(title="minrule", version=__version__)


class StrictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioRequest(StrictRequest):
    scenario: dict | None = None
    preset: str | None = None


class ValidateResponse(BaseModel):
    valid: bool
    name: str | None = None
    normalized: dict | None = None
    errors: list[dict] | None = None


class RunRequest(ScenarioRequest):
    seed: int | None = None
    stride: int | None = Field(default=None, ge=1)
    audit: bool = False
    include_trace: bool = False
    include_logs: bool = False


class RunResponse(BaseModel):
    summary: dict
    beliefs_csv: str | None = None
    events_csv: str | None = None
    messages_csv: str | None = None


class SweepRequest(ScenarioRequest):
    seeds: list[int] = Field(min_length=1)
    stride: int | None = Field(default=None, ge=1)
    audit: bool = False


class SweepResponse(BaseModel):
    aggregate: dict
    summaries: list[dict]


class BoundsResponse(BaseModel):
    report: dict


def _validation_errors(exc: ValidationError) -> list[dict]:
    return [
        {"loc": [str(x) for x in err["loc"]], "msg": err["msg"], "type": err["type"]}
        for err in exc.errors()
    ]


@app.exception_handler(ConfigError)
@app.exception_handler(ModelViolation)
async def _config_error(request, exc):
    return JSONResponse(status_code=400, content={"kind": "validation", "detail": str(exc)})


@app.exception_handler(ValidationError)
async def _pydantic_error(request, exc):
    return JSONResponse(
        status_code=400, content={"kind": "validation", "errors": _validation_errors(exc)}
    )


@app.exception_handler(InvariantBreach)
async def _invariant_error(request, exc):
    return JSONResponse(
        status_code=500, content={"kind": "invariant", "detail": str(exc), "step": exc.step}
    )


@app.exception_handler(ProtocolViolation)
async def _protocol_error(request, exc):
    return JSONResponse(status_code=500, content={"kind": "protocol", "detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/presets")
def presets() -> dict:
    return {"presets": preset_list()}


@app.post("/validate", response_model=ValidateResponse)
def validate(req: ScenarioRequest) -> ValidateResponse:
    try:
        cfg = resolve_scenario(req.scenario, req.preset)
    except ValidationError as exc:
        return ValidateResponse(valid=False, errors=_validation_errors(exc))
    except (ConfigError, ModelViolation) as exc:
        return ValidateResponse(valid=False, errors=[{"loc": [], "msg": str(exc), "type": "value_error"}])
    return ValidateResponse(valid=True, name=cfg.name, normalized=cfg.model_dump(mode="json"))


@app.post("/run", response_model=RunResponse, response_model_exclude_none=True)
def run(req: RunRequest) -> RunResponse:
    cfg = resolve_scenario(req.scenario, req.preset)
    trace = run_scenario(cfg, req.seed, stride=req.stride, audit=req.audit)
    out = RunResponse(summary=trace.summary)
    if req.include_trace:
        out.beliefs_csv = render_beliefs_csv(trace)
    if req.include_logs:
        out.events_csv = render_events_csv(trace)
        out.messages_csv = render_messages_csv(trace)
    return out


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    cfg = resolve_scenario(req.scenario, req.preset)
    result = sweep_scenario(cfg, req.seeds, stride=req.stride, audit=req.audit)
    return SweepResponse(aggregate=result.aggregate, summaries=result.summaries)


@app.post("/bounds", response_model=BoundsResponse)
def bounds(req: ScenarioRequest) -> BoundsResponse:
    cfg = resolve_scenario(req.scenario, req.preset)
    return BoundsResponse(report=bounds_report(cfg))
