"""Pydantic request/response models for the estimation service.

Panels travel as inline CSV text (the ingestion schema names the
columns), so the service is stateless and a remote client needs no shared
filesystem.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class PanelSchemaModel(BaseModel):
    firm: str = "firm"
    year: str = "year"
    y: str = "y"
    x: str = "x"
    z: list[str] = Field(default_factory=list)

    def as_mapping(self) -> dict:
        return {"firm": self.firm, "year": self.year, "y": self.y, "x": self.x, "z": self.z}


class DgpParams(BaseModel):
    n: int = 3000
    T: int = 20
    beta: float = 0.025
    gamma: float = 0.05
    shape_u: float = 0.32
    shape_e: float = 0.09
    shape_v_xi: float = 0.007
    shape_v_z: float = 2.08
    scale: float = 1.0
    phi_xi: float = 0.78
    phi_z: float = 0.48
    delta_xi: float = 0.570
    delta_z: float = 0.094
    tau_sq: float = 0.45
    c11: float = 16.130
    c21: float = 0.489
    c22: float = 0.258
    mu_y: float = 0.145
    sigma_y_sq: float = 0.0225
    burn_in: int = 10


class SimulateRequest(BaseModel):
    dgp: DgpParams = Field(default_factory=DgpParams)
    seed: Optional[int] = None
    first_year: int = 1
    panel_schema: PanelSchemaModel = Field(default_factory=PanelSchemaModel)


class SimulateResponse(BaseModel):
    csv_content: str
    n_obs: int
    seed: int


class EstimateRequest(BaseModel):
    csv_content: str
    panel_schema: PanelSchemaModel = Field(default_factory=PanelSchemaModel)
    method: str = "dc"
    blocks_per_year: Optional[int] = None
    fe: bool = False
    te: bool = False
    alpha: float = 0.05
    bootstrap_draws: int = 399
    partition_mode: str = "random"
    seed: Optional[int] = None


class EstimateResponse(BaseModel):
    method: str
    beta_hat: float
    gamma_hat: list[float]
    gamma_names: list[str]
    ci_beta: Optional[list[float]]
    ci_gamma: list[list[float]]
    subsample_estimates: Optional[list[float]]
    n_degenerate_blocks: int
    n_single_year_dropped: int
    n_obs: int
    seed: Optional[int]
    config: dict


class McRequest(BaseModel):
    dgp: DgpParams = Field(default_factory=DgpParams)
    reps: int = 500
    methods: list[str] = Field(default_factory=lambda: ["ols", "3m", "dc2"])
    specs: list[int] = Field(default_factory=lambda: [1])
    alpha: float = 0.05
    bootstrap_draws: int = 399
    partition_mode: str = "random"
    seed: Optional[int] = None
    threads: int = 1


class McCellModel(BaseModel):
    method: str
    spec: int
    coef: str
    mean: float
    sd: float
    coverage: Optional[float]
    n_degenerate: int
    reps: int


class McResponse(BaseModel):
    cells: list[McCellModel]
    csv_content: str
    table_text: str
    config: dict
    seed: int


class ExpandWindowRequest(BaseModel):
    csv_content: str
    panel_schema: PanelSchemaModel = Field(default_factory=PanelSchemaModel)
    start_end: int = 1980
    methods: list[str] = Field(default_factory=lambda: ["ols", "3m", "dc2"])
    fe: bool = True
    alpha: float = 0.05
    bootstrap_draws: int = 399
    partition_mode: str = "random"
    seed: Optional[int] = None


class WindowRowModel(BaseModel):
    end_year: int
    method: str
    coef: str
    estimate: float
    lo: float
    hi: float


class ExpandWindowResponse(BaseModel):
    rows: list[WindowRowModel]
    csv_content: str
    seed: int


class ErrorResponse(BaseModel):
    error_class: str
    message: str


class HealthResponse(BaseModel):
    status: str
    version: str
