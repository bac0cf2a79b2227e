"""FastAPI application wrapping the estimation package.

Domain errors surface as HTTP 400 with a machine-readable ``error_class``
(``usage`` | ``data`` | ``degeneracy`` | ``calibration``) that thin
clients map to exit codes.
"""

from __future__ import annotations

import io
import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..data_model import load_panel_csv, write_panel_csv
from ..dgp import DgpConfig, generate_panel
from ..errors import EivError
from ..experiments import (
    McConfig,
    estimate_panel,
    expanding_window,
    run_mc,
    summarize_tables,
)
from ..rng import fresh_seed
from . import schemas


def _load_inline_panel(csv_content: str, schema: schemas.PanelSchemaModel):
    return load_panel_csv(io.StringIO(csv_content), schema.as_mapping())


def _clean(value: float) -> float | None:
    return value if math.isfinite(value) else None


def create_app() -> FastAPI:
    app = FastAPI(title="eivdc", version=__version__)

    @app.exception_handler(EivError)
    async def eiv_error_handler(request: Request, exc: EivError):
        payload = schemas.ErrorResponse(error_class=exc.error_class, message=str(exc))
        return JSONResponse(status_code=400, content=payload.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        seed = req.seed if req.seed is not None else fresh_seed()
        cfg = DgpConfig(**req.dgp.model_dump(), seed=seed)
        panel = generate_panel(cfg).to_panel(first_year=req.first_year)
        buf = io.StringIO()
        write_panel_csv(panel, buf, {**req.panel_schema.as_mapping(),
                                     "z": req.panel_schema.z or ["z1"]})
        return schemas.SimulateResponse(
            csv_content=buf.getvalue(), n_obs=panel.n_obs, seed=seed
        )

    @app.post("/estimate", response_model=schemas.EstimateResponse)
    def estimate(req: schemas.EstimateRequest):
        seed = req.seed if req.seed is not None else fresh_seed()
        panel = _load_inline_panel(req.csv_content, req.panel_schema)
        report = estimate_panel(
            panel, req.method, fe=req.fe, te=req.te,
            blocks_per_year=req.blocks_per_year, mode=req.partition_mode,
            alpha=req.alpha, bootstrap_draws=req.bootstrap_draws, seed=seed,
        )
        names = [
            n if n == "const" else req.panel_schema.z[int(n[1:]) - 1]
            for n in report.gamma_names
        ]
        d = report.to_dict()
        return schemas.EstimateResponse(
            method=d["method"], beta_hat=d["beta_hat"], gamma_hat=d["gamma_hat"],
            gamma_names=names, ci_beta=d["ci_beta"], ci_gamma=d["ci_gamma"],
            subsample_estimates=d["subsample_estimates"],
            n_degenerate_blocks=d["n_degenerate_blocks"],
            n_single_year_dropped=panel.n_single_year_dropped,
            n_obs=panel.n_obs, seed=seed, config=d["config"],
        )

    @app.post("/mc", response_model=schemas.McResponse)
    def mc(req: schemas.McRequest):
        seed = req.seed if req.seed is not None else fresh_seed()
        cfg = McConfig(
            dgp=DgpConfig(**req.dgp.model_dump(), seed=0),
            reps=req.reps, methods=tuple(req.methods), specs=tuple(req.specs),
            alpha=req.alpha, bootstrap_draws=req.bootstrap_draws,
            partition_mode=req.partition_mode, seed=seed, threads=req.threads,
        )
        summary = run_mc(cfg)
        cells = [
            schemas.McCellModel(
                method=c.method, spec=c.spec, coef=c.coef, mean=c.mean, sd=c.sd,
                coverage=_clean(c.coverage), n_degenerate=c.n_degenerate, reps=c.reps,
            )
            for c in summary.cells
        ]
        return schemas.McResponse(
            cells=cells, csv_content=summary.to_csv_text(),
            table_text=summarize_tables(summary), config=summary.config, seed=seed,
        )

    @app.post("/expand-window", response_model=schemas.ExpandWindowResponse)
    def expand_window(req: schemas.ExpandWindowRequest):
        seed = req.seed if req.seed is not None else fresh_seed()
        panel = _load_inline_panel(req.csv_content, req.panel_schema)
        result = expanding_window(
            panel, start_end=req.start_end, methods=tuple(req.methods),
            fe=req.fe, alpha=req.alpha, bootstrap_draws=req.bootstrap_draws,
            partition_mode=req.partition_mode, seed=seed,
        )
        rows = [
            schemas.WindowRowModel(
                end_year=r.end_year, method=r.method, coef=r.coef,
                estimate=r.estimate, lo=r.lo, hi=r.hi,
            )
            for r in result.rows
        ]
        return schemas.ExpandWindowResponse(
            rows=rows, csv_content=result.to_csv_text(), seed=seed
        )

    return app


app = create_app()
