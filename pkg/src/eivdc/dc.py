"""Divide-and-conquer machinery: blocks, half-splits, ratios, medians.

The estimator partitions a cross-section into ``B`` blocks, splits every
block into two equal halves ``(R1, R2)``, and evaluates the third-moment
ratio with the numerator summed over ``R1`` and the denominator over
``R2``.  Because numerator and denominator come from disjoint data, each
block ratio is median-unbiased for the latent slope even when the slope is
zero, where the pooled ratio estimator degenerates.  The final estimate is
the median of the block ratios (midpoint of the central pair when their
count is even).

Panel support follows the same recipe per yearly cross-section, with two
optional transforms: a within transformation (firm demeaning) for firm
effects, applied to the complete data set before blocking, and per-half
demeaning inside every block for time effects, which absorbs a common year
shock without coupling the halves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data_model import (
    CrossSection,
    PanelData,
    cross_section_at,
    discard_to_multiple,
)
from .errors import (
    DegenerateBlockError,
    DivisibilityError,
    ParameterError,
    SingularDesignError,
    TooManyBlocksError,
)
from .estimators import gamma_ci_draws, partial_out

__all__ = [
    "BlockPartition",
    "SubsampleEstimates",
    "make_partition",
    "dc_subsample",
    "dc_estimate",
    "within_transform",
    "block_demean",
    "pooled_design",
    "panel_dc_estimate",
]

PARTITION_MODES = ("random", "adjacent")


@dataclass(frozen=True)
class BlockPartition:
    """Half-block index sets ``(R1, R2)`` for each of B blocks."""

    blocks: tuple
    mode: str
    seed: int | None = None

    def __post_init__(self):
        seen: set[int] = set()
        for r1, r2 in self.blocks:
            if len(r1) != len(r2):
                raise ParameterError("half-blocks must have equal size")
            for idx in (r1, r2):
                items = set(int(i) for i in idx)
                if seen & items:
                    raise ParameterError("half-blocks overlap")
                seen |= items

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_size(self) -> int:
        r1, r2 = self.blocks[0]
        return len(r1) + len(r2)


@dataclass(frozen=True)
class SubsampleEstimates:
    """Block ratios with their (year, block) labels.

    ``n_degenerate`` counts blocks whose denominator was exactly zero;
    those are excluded from ``values``.
    """

    values: np.ndarray
    labels: tuple = ()
    n_degenerate: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size and not np.all(np.isfinite(values)):
            raise ParameterError("subsample estimates must be finite")
        object.__setattr__(self, "values", values)


def make_partition(
    n: int, B: int, mode: str = "random", rng: np.random.Generator | None = None
) -> BlockPartition:
    """Partition ``n`` indices into B blocks of two equal halves.

    ``mode='random'`` permutes the indices before contiguous slicing;
    ``mode='adjacent'`` slices the given order.  Requires ``2B | n``.
    """
    if mode not in PARTITION_MODES:
        raise ParameterError(f"mode must be one of {PARTITION_MODES}, got {mode!r}")
    if B < 1:
        raise ParameterError("B must be >= 1")
    if B > n // 2:
        raise TooManyBlocksError(f"{B} blocks need at least {2 * B} rows, have {n}")
    if n % (2 * B) != 0:
        raise DivisibilityError(f"n={n} is not divisible by 2B={2 * B}")
    if mode == "random":
        if rng is None:
            raise ParameterError("random mode requires an rng")
        order = rng.permutation(n)
    else:
        order = np.arange(n)
    b = n // B
    half = b // 2
    blocks = []
    for j in range(B):
        block = order[j * b : (j + 1) * b]
        blocks.append((block[:half].copy(), block[half:].copy()))
    return BlockPartition(blocks=tuple(blocks), mode=mode)


def dc_subsample(cs: CrossSection, r1, r2) -> float:
    """One block ratio: numerator over ``r1``, denominator over ``r2``.

    Controls (if any) are residualized per half using only that half's
    rows.  An exactly-zero denominator raises
    :class:`DegenerateBlockError`.
    """
    res = partial_out(cs, r1, r2)
    num = math.fsum(res.x_dot * res.y_dot * res.y_dot)
    den = math.fsum(res.x_ddot * res.x_ddot * res.y_ddot)
    if den == 0.0:
        raise DegenerateBlockError("zero denominator in subsample ratio")
    return num / den


def _median(values: np.ndarray) -> float:
    return float(np.median(values))


def dc_estimate(
    cs: CrossSection, B: int, mode: str = "random", rng: np.random.Generator | None = None
) -> tuple[float, SubsampleEstimates]:
    """Median of B block ratios on one cross-section.

    Degenerate blocks (zero denominator) are dropped from the median with
    a warning; they have probability zero under continuous data but are
    reachable with ties in synthetic fixtures.
    """
    partition = make_partition(cs.n, B, mode=mode, rng=rng)
    values, labels, n_degen = [], [], 0
    for j, (r1, r2) in enumerate(partition.blocks):
        try:
            values.append(dc_subsample(cs, r1, r2))
            labels.append(j)
        except DegenerateBlockError:
            n_degen += 1
    if not values:
        raise DegenerateBlockError("all blocks have zero denominators")
    if n_degen:
        warnings.warn(f"excluded {n_degen} degenerate block(s)", stacklevel=2)
    subs = SubsampleEstimates(np.asarray(values), tuple(labels), n_degen)
    return _median(subs.values), subs


def _group_demean(columns: list[np.ndarray], groups: np.ndarray) -> list[np.ndarray]:
    _, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    out = []
    for col in columns:
        means = np.bincount(inverse, weights=col) / counts
        out.append(col - means[inverse])
    return out


def within_transform(panel: PanelData) -> PanelData:
    """Subtract firm-specific means from y, x, and every control column.

    Uses each firm's own number of observed years; per-firm means of the
    result are zero to floating-point accuracy.
    """
    cols = [panel.y, panel.x] + [panel.z[:, j] for j in range(panel.k)]
    demeaned = _group_demean(cols, panel.firm_id)
    z = np.column_stack(demeaned[2:]) if panel.k else np.empty((panel.n_obs, 0))
    return PanelData(
        firm_id=panel.firm_id, year=panel.year,
        y=demeaned[0], x=demeaned[1], z=z,
        firm_labels=panel.firm_labels,
        n_single_year_dropped=panel.n_single_year_dropped,
    )


def block_demean(cs: CrossSection, partition: BlockPartition) -> CrossSection:
    """Demean y and x within every half-block, halves independently.

    Rows outside the partition (none after an upstream discard) are left
    unchanged.  Idempotent.
    """
    y = cs.y.copy()
    x = cs.x.copy()
    for r1, r2 in partition.blocks:
        for idx in (r1, r2):
            if np.max(idx) >= cs.n:
                raise ParameterError("partition indexes beyond the cross-section")
            y[idx] -= y[idx].mean()
            x[idx] -= x[idx].mean()
    return CrossSection(y, x, cs.z)


def _alternating_demean(cols: list[np.ndarray], firm: np.ndarray, year: np.ndarray,
                        tol: float = 1e-12, max_iter: int = 200) -> list[np.ndarray]:
    """Two-way demeaning by alternating projections (exact on balanced data)."""
    cols = [c.copy() for c in cols]
    for _ in range(max_iter):
        cols = _group_demean(cols, firm)
        cols = _group_demean(cols, year)
        worst = 0.0
        for c in cols:
            for g in (firm, year):
                _, inv, cnt = np.unique(g, return_inverse=True, return_counts=True)
                worst = max(worst, np.max(np.abs(np.bincount(inv, weights=c) / cnt)))
        if worst < tol:
            break
    return cols


def pooled_design(
    panel: PanelData, fe: bool = False, te: bool = False, intercept: bool | None = None
) -> tuple[CrossSection, bool]:
    """Pooled (y, x, Z) after the requested effect transforms.

    Firm effects are removed by firm demeaning, time effects by year
    demeaning, both together by alternating projections.  The intercept
    column is included only when neither transform is applied (it is
    absorbed otherwise); pass ``intercept`` to override.  Returns the
    pooled cross-section and whether its first control column is the
    intercept.
    """
    if intercept is None:
        intercept = not fe and not te
    cols = [panel.y, panel.x] + [panel.z[:, j] for j in range(panel.k)]
    if fe and te:
        cols = _alternating_demean(cols, panel.firm_id, panel.year)
    elif fe:
        cols = _group_demean(cols, panel.firm_id)
    elif te:
        cols = _group_demean(cols, panel.year)
    z_parts = ([np.ones(panel.n_obs)] if intercept else []) + cols[2:]
    z = np.column_stack(z_parts) if z_parts else np.empty((panel.n_obs, 0))
    return CrossSection(cols[0], cols[1], z), intercept


def panel_dc_estimate(
    panel: PanelData,
    blocks_per_year: int,
    fe: bool = False,
    te: bool = False,
    mode: str = "random",
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray, SubsampleEstimates]:
    """Divide-and-conquer estimate on a panel.

    Pipeline: optional within transform (``fe``) on the complete panel;
    per year, reduce the cross-section to a multiple of
    ``2 * blocks_per_year`` rows (random discard), partition, optionally
    demean y and x per half-block (``te``), residualize the controls per
    half, and form the block ratios.  The slope estimate is the median
    over all (year, block) ratios; the control coefficients solve
    ``(Z'Z) g = Z'(y - x beta)`` on the pooled transformed data.

    The per-half control set carries an explicit intercept column only
    when ``fe`` is off (the within transform absorbs it).
    """
    if blocks_per_year < 1:
        raise ParameterError("blocks_per_year must be >= 1")
    pooled, _ = pooled_design(panel, fe=fe, te=te)

    work = within_transform(panel) if fe else panel
    years = work.years()
    values, labels, n_degen = [], [], 0
    for year in years:
        cs = cross_section_at(work, int(year))
        if not fe:
            cs = CrossSection(cs.y, cs.x, np.column_stack([np.ones(cs.n), cs.z]))
        if cs.n < 2 * blocks_per_year:
            raise TooManyBlocksError(
                f"year {year} has {cs.n} rows, needs >= {2 * blocks_per_year}"
            )
        cs = discard_to_multiple(cs, 2 * blocks_per_year, rng)
        partition = make_partition(cs.n, blocks_per_year, mode=mode, rng=rng)
        if te:
            cs = block_demean(cs, partition)
        for j, (r1, r2) in enumerate(partition.blocks):
            try:
                values.append(dc_subsample(cs, r1, r2))
                labels.append((int(year), j))
            except DegenerateBlockError:
                n_degen += 1
    if not values:
        raise DegenerateBlockError("all (year, block) ratios are degenerate")
    if n_degen:
        warnings.warn(f"excluded {n_degen} degenerate block(s)", stacklevel=2)
    subs = SubsampleEstimates(np.asarray(values), tuple(labels), n_degen)
    beta = _median(subs.values)
    if pooled.k > 0:
        gamma = gamma_ci_draws(pooled, np.array([beta]))[0]
    else:
        gamma = np.empty(0)
    return beta, gamma, subs
