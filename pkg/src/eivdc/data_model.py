"""Observation containers, panel indexing, validation, and CSV ingestion.

Two containers are used throughout the package:

``CrossSection``
    One observation set ``{(y_i, x_i, z_i)}`` consumed by the
    cross-sectional estimators.  ``x`` is the mismeasured regressor, ``z``
    the (possibly empty) matrix of perfectly measured controls, including
    an intercept column when the caller requests one.

``PanelData``
    An unbalanced firm-year panel from which yearly cross-sections are
    extracted in stable firm order.

Both are immutable after construction: the backing arrays are marked
read-only so they can be shared freely across parallel workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    InsufficientDataError,
    NotFoundError,
    ParameterError,
    ParseError,
    SchemaError,
    SingularDesignError,
)

__all__ = [
    "CrossSection",
    "PanelData",
    "EstimateReport",
    "load_panel_csv",
    "write_panel_csv",
    "cross_section_at",
    "discard_to_multiple",
]


def _as_readonly_float(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CrossSection:
    """One cross-section of (outcome, mismeasured regressor, controls).

    Parameters
    ----------
    y, x : array, shape (n,)
        Outcome and mismeasured regressor.
    z : array, shape (n, k), optional
        Perfectly measured controls; ``k = 0`` when omitted.  Must have
        full column rank when ``k > 0``.
    """

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        y = _as_readonly_float(self.y, "y")
        x = _as_readonly_float(self.x, "x")
        if y.ndim != 1 or x.ndim != 1:
            raise DataError("y and x must be one-dimensional")
        if len(y) != len(x):
            raise DataError(f"length mismatch: y has {len(y)}, x has {len(x)}")
        if len(y) < 1:
            raise InsufficientDataError("empty cross-section")
        z = self.z
        if z is None:
            z = np.empty((len(y), 0))
        z = _as_readonly_float(z, "z")
        if z.ndim != 2:
            raise DataError("z must be two-dimensional")
        if z.shape[0] != len(y):
            raise DataError(f"z has {z.shape[0]} rows, expected {len(y)}")
        if z.shape[1] > 0 and np.linalg.matrix_rank(z) < z.shape[1]:
            raise SingularDesignError(
                f"control matrix is rank deficient ({z.shape[1]} columns)"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def k(self) -> int:
        return self.z.shape[1]

    def subset(self, idx) -> "CrossSection":
        """Cross-section restricted to the given row indices."""
        idx = np.asarray(idx)
        return CrossSection(self.y[idx], self.x[idx], self.z[idx])


@dataclass(frozen=True)
class PanelData:
    """Unbalanced firm-year panel.

    Rows are canonically ordered by (firm_id, year).  ``firm_labels`` holds
    the original firm identifiers when they were strings in the source file
    (``firm_labels[firm_id]`` is the label of that firm).

    Invariants: (firm_id, year) pairs are unique, and whenever the panel
    spans more than one distinct year, every firm is observed in at least
    two of them (single-year firms are dropped at load time).
    """

    firm_id: np.ndarray
    year: np.ndarray
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray = None  # type: ignore[assignment]
    firm_labels: tuple = None  # type: ignore[assignment]
    n_single_year_dropped: int = 0

    def __post_init__(self):
        firm = np.asarray(self.firm_id)
        year = np.asarray(self.year)
        if firm.dtype.kind not in "iu" or year.dtype.kind not in "iu":
            raise DataError("firm_id and year must be integer vectors")
        y = _as_readonly_float(self.y, "y")
        x = _as_readonly_float(self.x, "x")
        z = self.z
        if z is None:
            z = np.empty((len(y), 0))
        z = _as_readonly_float(z, "z")
        n = len(y)
        if not (len(firm) == len(year) == len(x) == n and z.shape[0] == n):
            raise DataError("all panel columns must have identical length")
        if n == 0:
            raise InsufficientDataError("empty panel")

        order = np.lexsort((year, firm))
        firm, year, y, x, z = firm[order], year[order], y[order], x[order], z[order]

        pairs = np.stack([firm, year], axis=1)
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        if np.any(counts > 1):
            f, t = uniq[np.argmax(counts > 1)]
            raise DataError(f"duplicate (firm, year) pair: firm={f}, year={t}")

        if len(np.unique(year)) > 1:
            firms, nyears = np.unique(uniq[:, 0], return_counts=True)
            single = firms[nyears < 2]
            if len(single) > 0:
                raise DataError(
                    f"{len(single)} firm(s) observed in a single year "
                    f"(first: firm={single[0]}); filter them before construction"
                )

        for name, arr in (("firm_id", firm), ("year", year)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "y", _as_readonly_float(y, "y"))
        object.__setattr__(self, "x", _as_readonly_float(x, "x"))
        object.__setattr__(self, "z", _as_readonly_float(z, "z"))
        if self.firm_labels is not None:
            object.__setattr__(self, "firm_labels", tuple(self.firm_labels))

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def k(self) -> int:
        return self.z.shape[1]

    def years(self) -> np.ndarray:
        return np.unique(self.year)

    def firms(self) -> np.ndarray:
        return np.unique(self.firm_id)


@dataclass
class EstimateReport:
    """Point estimates, confidence intervals, and replay metadata.

    ``ci_beta`` and the entries of ``ci_gamma`` are (lo, hi) pairs at level
    ``1 - alpha``.  For the divide-and-conquer method, ``subsample_estimates``
    holds the per-(year, block) ratios whose median is ``beta_hat``.
    """

    method: str
    beta_hat: float
    gamma_hat: np.ndarray
    gamma_names: tuple
    ci_beta: tuple | None = None
    ci_gamma: tuple = ()
    subsample_estimates: np.ndarray | None = None
    n_degenerate_blocks: int = 0
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("ols", "3m", "dc"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.method == "dc" and self.subsample_estimates is not None:
            values = np.asarray(self.subsample_estimates, dtype=float)
            med = float(np.median(values))
            scale = max(1.0, abs(med))
            if abs(med - self.beta_hat) > 1e-10 * scale:
                raise DataError("subsample_estimates median does not equal beta_hat")
        if self.ci_beta is not None:
            lo, hi = self.ci_beta
            if not lo <= hi:
                raise DataError("ci_beta has lo > hi")
            if self.method == "dc" and not lo <= self.beta_hat <= hi:
                # quantiles of the sign-symmetric centered resamples bracket 0
                raise DataError("dc bootstrap interval does not contain beta_hat")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "beta_hat": float(self.beta_hat),
            "gamma_hat": [float(g) for g in np.atleast_1d(self.gamma_hat)],
            "gamma_names": list(self.gamma_names),
            "ci_beta": list(self.ci_beta) if self.ci_beta is not None else None,
            "ci_gamma": [list(ci) for ci in self.ci_gamma],
            "subsample_estimates": (
                [float(v) for v in self.subsample_estimates]
                if self.subsample_estimates is not None
                else None
            ),
            "n_degenerate_blocks": int(self.n_degenerate_blocks),
            "seed": self.seed,
            "config": self.config,
        }


def _schema_columns(schema: Mapping[str, Any]) -> tuple[str, str, str, str, list[str]]:
    try:
        firm_col = schema["firm"]
        year_col = schema["year"]
        y_col = schema["y"]
        x_col = schema["x"]
    except KeyError as exc:
        raise SchemaError(f"schema is missing the {exc.args[0]!r} role") from None
    z_cols = list(schema.get("z", []) or [])
    return firm_col, year_col, y_col, x_col, z_cols


def load_panel_csv(path, schema: Mapping[str, Any]) -> PanelData:
    """Load and validate a firm-year panel from a CSV file.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row.
    schema : mapping
        Maps roles to column names: ``firm``, ``year``, ``y``, ``x`` are
        required; ``z`` is an optional list of control column names.

    Returns
    -------
    PanelData
        Firms observed in only one year are dropped; the count is stored on
        ``n_single_year_dropped``.  String firm identifiers are mapped to
        dense integers (sorted label order); the labels are retained for
        serialization.

    Raises
    ------
    SchemaError, ParseError, DataError
        Missing columns, non-numeric cells (named by file line), or
        duplicated (firm, year) pairs.
    """
    firm_col, year_col, y_col, x_col, z_cols = _schema_columns(schema)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    missing = [c for c in [firm_col, year_col, y_col, x_col, *z_cols] if c not in raw.columns]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in {path}")

    def numeric(col: str) -> np.ndarray:
        out = np.empty(len(raw), dtype=float)
        for i, cell in enumerate(raw[col].to_numpy()):
            try:
                value = float(cell)  # correctly-rounded strtod
            except (TypeError, ValueError):
                value = np.nan
            if not np.isfinite(value):
                raise ParseError(
                    f"non-numeric or missing value in column {col!r} at line {i + 2}"
                )
            out[i] = value
        return out

    year_f = numeric(year_col)
    if not np.all(year_f == np.round(year_f)):
        raise ParseError(f"column {year_col!r} contains non-integer years")
    year = year_f.astype(np.int64)

    firm_raw = raw[firm_col]
    firm_numeric = pd.to_numeric(firm_raw.replace("", np.nan), errors="coerce")
    if firm_numeric.notna().all() and np.all(firm_numeric == np.round(firm_numeric)):
        firm = firm_numeric.to_numpy(dtype=np.int64)
        labels = None
    else:
        codes, uniques = pd.factorize(firm_raw, sort=True)
        firm = codes.astype(np.int64)
        labels = tuple(uniques)

    y = numeric(y_col)
    x = numeric(x_col)
    z = np.column_stack([numeric(c) for c in z_cols]) if z_cols else np.empty((len(y), 0))

    pairs = np.stack([firm, year], axis=1)
    uniq, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    dup = np.nonzero(counts > 1)[0]
    if len(dup) > 0:
        row = int(np.nonzero(inverse == dup[0])[0][1]) + 2
        f_label = labels[uniq[dup[0], 0]] if labels is not None else uniq[dup[0], 0]
        raise DataError(
            f"duplicate (firm={f_label}, year={uniq[dup[0], 1]}) at line {row}"
        )

    n_dropped = 0
    if len(np.unique(year)) > 1:
        firms_u, nyears = np.unique(uniq[:, 0], return_counts=True)
        single = set(firms_u[nyears < 2].tolist())
        if single:
            keep = ~np.isin(firm, list(single))
            n_dropped = len(single)
            firm, year, y, x, z = firm[keep], year[keep], y[keep], x[keep], z[keep]
            if len(y) == 0:
                raise InsufficientDataError("no firms with two or more years")

    return PanelData(
        firm_id=firm, year=year, y=y, x=x, z=z,
        firm_labels=labels, n_single_year_dropped=n_dropped,
    )


def write_panel_csv(panel: PanelData, path, schema: Mapping[str, Any]) -> None:
    """Serialize a panel using the same schema accepted by the loader."""
    firm_col, year_col, y_col, x_col, z_cols = _schema_columns(schema)
    if len(z_cols) != panel.k:
        raise SchemaError(
            f"schema names {len(z_cols)} control column(s), panel has {panel.k}"
        )
    if panel.firm_labels is not None:
        firm_out: Sequence = [panel.firm_labels[i] for i in panel.firm_id]
    else:
        firm_out = panel.firm_id.tolist()

    def render(handle) -> None:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([firm_col, year_col, y_col, x_col, *z_cols])
        for i in range(panel.n_obs):
            # repr() floats round-trip bit-exactly through the loader
            writer.writerow(
                [firm_out[i], int(panel.year[i]),
                 repr(float(panel.y[i])), repr(float(panel.x[i])),
                 *(repr(float(panel.z[i, j])) for j in range(panel.k))]
            )

    if hasattr(path, "write"):
        render(path)
    else:
        with open(path, "w", newline="") as handle:
            render(handle)


def cross_section_at(panel: PanelData, year: int) -> CrossSection:
    """Rows of one year, in stable firm_id order."""
    mask = panel.year == year
    if not np.any(mask):
        raise NotFoundError(f"year {year} not present in panel")
    return CrossSection(panel.y[mask], panel.x[mask], panel.z[mask])


def discard_to_multiple(cs: CrossSection, m: int, rng: np.random.Generator) -> CrossSection:
    """Drop uniformly chosen rows so the count is a multiple of ``m``.

    The retained rows keep their original relative order; the result is
    deterministic given the generator state.  No generator draws are
    consumed when the count is already a multiple of ``m``.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    n = cs.n
    if n < m:
        raise InsufficientDataError(f"cannot reduce {n} rows to a multiple of {m}")
    n_drop = n % m
    if n_drop == 0:
        return cs
    if rng is None:
        raise ParameterError("discarding rows requires an rng")
    drop = rng.choice(n, size=n_drop, replace=False)
    keep = np.setdiff1d(np.arange(n), drop)
    return cs.subset(keep)
