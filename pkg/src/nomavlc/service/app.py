"""FastAPI front end for the link simulator.

Endpoints mirror the CLI subcommands: /channel, /train, /sweep-ber,
/sum-rate, /verify-theorem1 and /mu-ladder. Numeric results are returned
as named CSV artifacts; clients (the bundled CLI included) write them to
disk. Configuration failures map to structured 4xx bodies carrying the
error class so thin clients can translate them into exit codes.
"""

from __future__ import annotations

import json
import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .. import __version__, analysis, harness
from ..config import (
    ConfigParseError,
    ConfigSchemaError,
    GeometryError,
    SimConfig,
    parse_config,
)
from ..geometry import build_channel_matrix, channel_csv
from ..noma import Constellation, qos_power
from .schemas import (
    Artifact,
    HealthResponse,
    JobRequest,
    JobResponse,
    MuLadderLayer,
    MuLadderRequest,
    MuLadderResponse,
    TheoremCase,
    TheoremResponse,
)


class TheoremRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict = Field(default_factory=dict)
    seed: int | None = None
    pairs: int = 20
    kappas: list[float] = Field(default=[0.5, 1.0, 2.0])
    samples: int = 100_000


def parse_snr_range(spec: str) -> list[float]:
    """Parse 'lo:hi:step' (dB) into a strictly increasing grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigSchemaError(f"SNR range must be 'lo:hi:step', got {spec!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigSchemaError(f"SNR range must be numeric, got {spec!r}") from exc
    if step <= 0 or hi < lo:
        raise ConfigSchemaError(f"SNR range needs step > 0 and hi >= lo, got {spec!r}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def resolve_config(req: JobRequest) -> SimConfig:
    cfg = parse_config(json.dumps(req.config))
    updates: dict = {}
    if req.seed is not None:
        updates["master_seed"] = req.seed
    if req.variant is not None:
        if req.variant not in cfg.variants:
            updates["variants"] = [req.variant]
        else:
            updates["variants"] = [req.variant]
    if req.snr is not None:
        updates["snr_grid_db"] = parse_snr_range(req.snr)
    if updates:
        try:
            cfg = cfg.model_copy(update=updates)
            cfg = parse_config(cfg.model_dump_json())  # re-validate after overrides
        except (ConfigParseError, ConfigSchemaError, GeometryError):
            raise
    return cfg


def create_app() -> FastAPI:
    app = FastAPI(title="nomavlc", version=__version__)

    @app.exception_handler(ConfigParseError)
    async def _parse_err(_: Request, exc: ConfigParseError):
        return JSONResponse(status_code=400, content={"error": "parse", "detail": str(exc)})

    @app.exception_handler(ConfigSchemaError)
    async def _schema_err(_: Request, exc: ConfigSchemaError):
        return JSONResponse(status_code=422, content={"error": "schema", "detail": str(exc)})

    @app.exception_handler(GeometryError)
    async def _geom_err(_: Request, exc: GeometryError):
        return JSONResponse(status_code=422, content={"error": "geometry", "detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_err(_: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": "runtime", "detail": str(exc)})

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/config/default")
    def default_config():
        return json.loads(SimConfig().model_dump_json())

    @app.post("/channel", response_model=JobResponse)
    def channel(req: JobRequest):
        cfg = resolve_config(req)
        room = cfg.geometry.room()
        artifacts = []
        for u in range(cfg.num_users):
            H = build_channel_matrix(room, cfg.geometry.user(u))
            artifacts.append(Artifact(name=f"H_user{u}.csv", content=channel_csv(H, u)))
        return JobResponse(artifacts=artifacts, summary={"num_users": cfg.num_users})

    @app.post("/train", response_model=JobResponse)
    def train(req: JobRequest):
        cfg = resolve_config(req)
        out, state, trace_csv = harness.train_report(cfg)
        return JobResponse(
            artifacts=[
                Artifact(name="predistorter_coeffs.csv", content=out.csv),
                Artifact(name="mse_trace.csv", content=trace_csv),
            ],
            notices=out.notices,
            summary={"n_cheb": int(state.coeffs.size), "iterations": int(state.iteration)},
        )

    @app.post("/sweep-ber", response_model=JobResponse)
    def sweep_ber(req: JobRequest):
        cfg = resolve_config(req)
        out = harness.sweep(cfg)
        artifacts = [Artifact(name=f"{out.name}.csv", content=out.csv)]
        if out.svg is not None:
            artifacts.append(Artifact(name=f"{out.name}.svg", content=out.svg))
        return JobResponse(artifacts=artifacts, notices=out.notices, summary={"points": len(out.csv.splitlines()) - 1})

    @app.post("/sum-rate", response_model=JobResponse)
    def sum_rate(req: JobRequest):
        cfg = resolve_config(req)
        out = harness.sum_rate_experiment(cfg)
        return JobResponse(
            artifacts=[Artifact(name=f"{out.name}.csv", content=out.csv)],
            notices=out.notices,
        )

    @app.post("/verify-theorem1", response_model=TheoremResponse)
    def verify_theorem1(req: TheoremRequest):
        cfg = parse_config(json.dumps(req.config))
        seed = req.seed if req.seed is not None else cfg.master_seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, 71]))
        cases = []
        lines = ["pair,kappa,left,right,std_error,margin_sigmas,holds,degenerate"]
        for pair in range(req.pairs):
            # random 2x2 channels scaled so both log-strengths are positive
            sb = np.sort(rng.uniform(0.8, 2.0, 2))[::-1]
            sp = np.sort(rng.uniform(0.8, 2.0, 2))[::-1]
            for kappa in req.kappas:
                rep = analysis.verify_theorem1(sb, sp, kappa, req.samples, rng)
                margin = (rep.left - rep.right) / rep.std_error if rep.std_error > 0 else math.inf
                cases.append(
                    TheoremCase(
                        kappa=kappa, pair=pair, left=rep.left, right=rep.right,
                        std_error=rep.std_error, holds=rep.holds,
                    )
                )
                lines.append(
                    f"{pair},{kappa:.10g},{rep.left:.10g},{rep.right:.10g},"
                    f"{rep.std_error:.10g},{margin:.10g},{str(rep.holds).lower()},{str(rep.degenerate).lower()}"
                )
        csv = "\n".join(lines) + "\n"
        return TheoremResponse(
            cases=cases,
            all_hold=all(c.holds for c in cases),
            artifacts=[Artifact(name="theorem1_margins.csv", content=csv)],
        )

    @app.post("/mu-ladder", response_model=MuLadderResponse)
    def mu_ladder_endpoint(req: MuLadderRequest):
        constellation = Constellation(req.modulation)
        if req.powers is not None:
            powers = sorted((float(p) for p in req.powers), reverse=True)
        else:
            rates = req.qos_rates if req.qos_rates is not None else [0.7, 0.6]
            powers = sorted((qos_power(r, 0.0) for r in rates), reverse=True)
        ladder = analysis.mu_ladder(constellation, powers)
        layers = [
            MuLadderLayer(layer=i + 1, moduli=sorted(float(m) for m in lay.moduli))
            for i, lay in enumerate(ladder.layers)
        ]
        bounds = []
        for s2 in req.noise_variances:
            p_sqrt = analysis.ber_sqrt_m(ladder, s2)
            bounds.append(
                {"noise_variance": s2, "p_sqrt_m": p_sqrt, "p_m": analysis.ber_qam(p_sqrt)}
            )
        return MuLadderResponse(powers=powers, layers=layers, bounds=bounds)

    return app


app = create_app()
