import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property, lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ParameterError, TruncationBudgetError
from .extremal import (
    BrownResnick,
    CorrelationFamily,
    ExtremalModel,
    GeometricGaussian,
    Independence,
    PerfectDependence,
    Schlather,
    Semivariogram,
    Smith,
    Tube,
    correlation,
    pairwise_extremal_coefficient,
    semivariogram,
)
from .gaussian_fields import CholeskySampler, CirculantSampler, intrinsic_sampler, stationary_sampler
from .geometry import Region
from .workers import parallel_map

"""Monte-Carlo simulation of max-stable fields on regular grids over λA.

Smith and tube fields are built from Poisson storms (moving maxima); Schlather, geometric Gaussian and
Brown-Resnick fields from Gaussian spectral functions. Storms arrive in decreasing order of intensity and
simulation stops once no later storm can raise any site. Gaussian spectral functions are unbounded, so
they are cut at an envelope and the resulting bias is reported with every field.
"""

SMITH_MARGIN = 6.0
REFERENCE_LEVEL = 0.5
NODATA = -9999.0
CHUNK_SIZE = 250


class TruncationKind(Enum):
    EXACT = "exact"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class TruncationReport:
    """bound: maximal bias on P(Z(x) <= z) for z >= REFERENCE_LEVEL."""

    kind: TruncationKind
    bound: float
    storms: int
    budget_exhausted: bool = False

    def __str__(self) -> str:
        exhausted = ", storm budget exhausted" if self.budget_exhausted else ""
        return f"{self.kind.value} (bound={self.bound:.3g}, storms={self.storms}{exhausted})"


@dataclass(frozen=True)
class MonteCarloSettings:
    m_per_unit: int = 7
    replicates: int = 10000
    seed: int = 42
    alpha: float = 0.9
    envelope_tail: float = 4e-4
    max_storms: int = 200_000
    strict: bool = False
    batch: int = 64

    def __post_init__(self) -> None:
        if self.m_per_unit < 1:
            msg = f"m_per_unit must be a positive integer, got {self.m_per_unit}"
            raise ParameterError(msg)
        if self.replicates < 1:
            msg = f"replicate count must be positive, got {self.replicates}"
            raise ParameterError(msg)
        if not 0 < self.envelope_tail < 0.5:
            msg = f"envelope tail probability must lie in (0, 0.5), got {self.envelope_tail}"
            raise ParameterError(msg)
        if self.max_storms < 1 or self.batch < 1:
            msg = f"storm budget and batch size must be positive, got {self.max_storms} and {self.batch}"
            raise ParameterError(msg)


@dataclass(frozen=True)
class GridSpec:
    """Regular lattice of cell centers over λA: m_per_unit·λ cells along the side or diameter of A."""

    region: Region
    lambda_: float = 1.0
    m_per_unit: int = 7

    def __post_init__(self) -> None:
        if not isinstance(self.region, Region):
            msg = f"simulation grids cover disks and squares, got {self.region}"
            raise ParameterError(msg)
        if not self.lambda_ > 0:
            msg = f"homothety ratio must be positive, got {self.lambda_}"
            raise ParameterError(msg)
        if self.m_per_unit < 1:
            msg = f"m_per_unit must be a positive integer, got {self.m_per_unit}"
            raise ParameterError(msg)

    @cached_property
    def scaled_region(self) -> Region:
        return self.region.scale(self.lambda_)

    @cached_property
    def side_count(self) -> int:
        return max(1, round(self.m_per_unit * self.lambda_))

    @cached_property
    def cellsize(self) -> float:
        x0, _, x1, _ = self.scaled_region.bounds()
        return (x1 - x0) / self.side_count

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Cell-center coordinates along one axis, relative to the lower-left corner."""
        return (np.arange(self.side_count) + 0.5) * self.cellsize

    @cached_property
    def mask(self) -> np.ndarray:
        """(rows, columns) boolean mask of the cells whose center lies in λA; row index follows y."""
        x, y = np.meshgrid(self.xs, self.ys)
        return self.scaled_region.contains(np.stack([x, y], axis=-1))

    @cached_property
    def xs(self) -> np.ndarray:
        return self.scaled_region.bounds()[0] + self.coordinates

    @cached_property
    def ys(self) -> np.ndarray:
        return self.scaled_region.bounds()[1] + self.coordinates

    @cached_property
    def points(self) -> np.ndarray:
        x, y = np.meshgrid(self.xs, self.ys)
        return np.column_stack([x[self.mask], y[self.mask]])

    @property
    def site_count(self) -> int:
        return len(self.points)

    def lattice(self) -> tuple[tuple[int, int], float, np.ndarray]:
        return (self.side_count, self.side_count), self.cellsize, self.mask

    def __repr__(self) -> str:
        return f"GridSpec({self.lambda_}·{self.region}, {self.side_count}x{self.side_count} cells, {self.site_count} sites)"


@dataclass(frozen=True)
class FieldSample:
    grid: GridSpec
    values: np.ndarray
    seed: int
    replicate: int
    model: ExtremalModel
    truncation_report: TruncationReport


class LossSample(NamedTuple):
    l_n: float
    u: float
    seed: int
    replicate: int


class EmpiricalMoments(NamedTuple):
    mean: float
    variance: float
    stderr: float
    mean_stderr: float


class QuantileEstimate(NamedTuple):
    value: float
    stderr: float


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for replicate `replicate` of run `seed`, whatever the scheduling."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


@lru_cache(maxsize=16)
def _stationary_sampler(corr: CorrelationFamily, grid: GridSpec) -> CholeskySampler | CirculantSampler:
    return stationary_sampler(lambda h: correlation(corr, h), grid.points, grid.lattice())


@lru_cache(maxsize=16)
def _intrinsic_sampler(vario: Semivariogram, grid: GridSpec) -> CholeskySampler:
    return intrinsic_sampler(lambda h: semivariogram(vario, h), grid.points)


def _budget_exhausted(model: ExtremalModel, storms: int, values: np.ndarray, settings: MonteCarloSettings) -> None:
    msg = f"storm budget of {settings.max_storms} exhausted for {model} after {storms} storms"
    if settings.strict or values.min() <= 0:
        raise TruncationBudgetError(msg)
    logging.warning(f"{msg}, keeping the truncated field")


def _smith_storms(model: Smith, points: np.ndarray, rng: np.random.Generator,
                  settings: MonteCarloSettings) -> tuple[np.ndarray, TruncationReport]:
    margin = SMITH_MARGIN * math.sqrt(model.eigenvalues[-1])
    peak = 1.0 / (2 * math.pi * math.sqrt(np.linalg.det(model.sigma_mat)))
    low, high = points.min(axis=0) - margin, points.max(axis=0) + margin
    area = float(np.prod(high - low))

    values = np.zeros(len(points))
    arrival, storms, exhausted = 0.0, 0, False
    while True:
        arrivals = arrival + np.cumsum(rng.standard_exponential(settings.batch))
        centers = low + rng.random((settings.batch, 2)) * (high - low)
        offsets = points[None, :, :] - centers[:, None, :]
        shape = peak * np.exp(-0.5 * np.einsum("...i,ij,...j->...", offsets, model.precision, offsets))
        values = np.maximum(values, ((area / arrivals)[:, None] * shape).max(axis=0))
        arrival, storms = float(arrivals[-1]), storms + settings.batch

        if area / arrival * peak < values.min():
            break
        if storms >= settings.max_storms:
            _budget_exhausted(model, storms, values, settings)
            exhausted = True
            break

    logging.debug(f"{model}: {storms} storms over a box of area {area}")
    # storms centred outside the box are farther than SMITH_MARGIN standard deviations along an axis
    bound = 4 * float(ndtr(-SMITH_MARGIN)) / REFERENCE_LEVEL
    return values, TruncationReport(TruncationKind.TRUNCATED, bound, storms, exhausted)


def _tube_storms(model: Tube, grid: GridSpec, rng: np.random.Generator,
                 settings: MonteCarloSettings) -> tuple[np.ndarray, TruncationReport]:
    """Each storm only touches the lattice cells in a window around its center."""
    (rows, columns), step, mask = grid.lattice()
    x0, y0 = grid.xs[0], grid.ys[0]
    low = np.array([x0, y0]) - model.r_b
    high = np.array([grid.xs[-1], grid.ys[-1]]) + model.r_b
    area = float(np.prod(high - low))
    reach = math.ceil(model.r_b / step + 0.5)
    window = np.arange(-reach, reach + 1)

    values = np.zeros((rows, columns))
    arrival, storms, exhausted = 0.0, 0, False
    while True:
        arrivals = arrival + np.cumsum(rng.standard_exponential(settings.batch))
        centers = low + rng.random((settings.batch, 2)) * (high - low)
        column = np.rint((centers[:, 0] - x0) / step).astype(int)[:, None, None] + window[None, None, :]
        row = np.rint((centers[:, 1] - y0) / step).astype(int)[:, None, None] + window[None, :, None]
        column, row = np.broadcast_arrays(column, row)
        dx = x0 + column * step - centers[:, 0, None, None]
        dy = y0 + row * step - centers[:, 1, None, None]
        hit = (column >= 0) & (column < columns) & (row >= 0) & (row < rows) & (dx * dx + dy * dy < model.r_b ** 2)
        heights = np.broadcast_to((area / arrivals * model.h_b)[:, None, None], hit.shape)
        np.maximum.at(values, (row[hit], column[hit]), heights[hit])
        arrival, storms = float(arrivals[-1]), storms + settings.batch

        if area / arrival * model.h_b < values[mask].min():
            break
        if storms >= settings.max_storms:
            _budget_exhausted(model, storms, values[mask], settings)
            exhausted = True
            break

    logging.debug(f"{model}: {storms} storms over a box of area {area}")
    return values[mask], TruncationReport(TruncationKind.EXACT, 0.0, storms, exhausted)


def _spectral(model: Schlather | GeometricGaussian | BrownResnick, grid: GridSpec, rng: np.random.Generator,
              settings: MonteCarloSettings) -> tuple[np.ndarray, TruncationReport]:
    points = grid.points
    tail = settings.envelope_tail

    if isinstance(model, Schlather):
        sampler = _stationary_sampler(model.corr, grid)
        envelope = math.sqrt(2 * math.pi) * math.sqrt(-2 * math.log(tail))

        def spectral(fields: np.ndarray) -> np.ndarray:
            return math.sqrt(2 * math.pi) * np.maximum(fields, 0.0)

    elif isinstance(model, GeometricGaussian):
        sampler = _stationary_sampler(model.corr, grid)
        sigma = model.sigma_eps
        envelope = math.exp(sigma * (sigma + float(ndtri(1 - tail))) - sigma ** 2 / 2)

        def spectral(fields: np.ndarray) -> np.ndarray:
            return np.exp(sigma * fields - sigma ** 2 / 2)

    else:
        sampler = _intrinsic_sampler(model.vario, grid)
        diameter = float(np.max(np.linalg.norm(points - points[0], axis=-1))) * 2
        spread = math.sqrt(2 * semivariogram(model.vario, diameter))
        # exp(W - γ) exceeds the envelope with mass at most `tail` for every variance up to spread²
        envelope = math.exp(spread * float(ndtri(1 - tail)) + spread ** 2 / 2)

        def spectral(fields: np.ndarray) -> np.ndarray:
            pinned = np.concatenate([np.zeros((len(fields), 1)), fields], axis=1)
            origins = rng.integers(len(points), size=len(fields))
            offsets = np.linalg.norm(points[None, :, :] - points[origins][:, None, :], axis=-1)
            increments = pinned - pinned[np.arange(len(fields)), origins][:, None]
            return np.exp(increments - semivariogram(model.vario, offsets))

    values = np.zeros(len(points))
    arrival, storms, exhausted = 0.0, 0, False
    while True:
        arrivals = arrival + np.cumsum(rng.standard_exponential(settings.batch))
        fields = spectral(sampler.sample(rng, settings.batch))
        values = np.maximum(values, (fields / arrivals[:, None]).max(axis=0))
        arrival, storms = float(arrivals[-1]), storms + settings.batch

        if envelope / arrival < values.min():
            break
        if storms >= settings.max_storms:
            _budget_exhausted(model, storms, values, settings)
            exhausted = True
            break

    logging.debug(f"{model}: {storms} spectral functions, envelope {envelope}")
    return values, TruncationReport(TruncationKind.TRUNCATED, tail / REFERENCE_LEVEL, storms, exhausted)


def simulate_field(model: ExtremalModel, grid: GridSpec, seed: int, replicate: int = 0,
                   settings: MonteCarloSettings | None = None) -> FieldSample:
    """One realization of the standard Fréchet max-stable field on the grid sites."""
    settings = settings or MonteCarloSettings()
    if grid.site_count == 0:
        msg = f"{grid} has no sites"
        raise ParameterError(msg)

    rng = replicate_rng(seed, replicate)
    if isinstance(model, Smith):
        values, report = _smith_storms(model, grid.points, rng, settings)
    elif isinstance(model, Tube):
        values, report = _tube_storms(model, grid, rng, settings)
    elif isinstance(model, Schlather | GeometricGaussian | BrownResnick):
        values, report = _spectral(model, grid, rng, settings)
    elif isinstance(model, PerfectDependence):
        values = np.full(grid.site_count, 1.0 / rng.standard_exponential())
        report = TruncationReport(TruncationKind.EXACT, 0.0, 1)
    elif isinstance(model, Independence):
        values = 1.0 / rng.standard_exponential(grid.site_count)
        report = TruncationReport(TruncationKind.EXACT, 0.0, grid.site_count)
    else:
        msg = f"no simulation method for {model}"
        raise ParameterError(msg)

    return FieldSample(grid, values, seed, replicate, model, report)


def loss_sample(field: FieldSample, u: float) -> LossSample:
    """Riemann approximation of the fraction of λA where Z exceeds u."""
    if not u > 0:
        msg = f"threshold u must be a positive real, got {u}"
        raise ParameterError(msg)
    return LossSample(float(np.mean(field.values > u)), u, field.seed, field.replicate)


def grid_loss_variance(model: ExtremalModel, grid: GridSpec, u: float) -> float:
    """Exact variance of the grid loss: the mean of e^{-Θ(x_i - x_j)/u} - e^{-2/u} over ordered site pairs.

    This is what empirical_var estimates, without simulation; it only differs from R2(λA) by the Riemann
    discretisation.
    """
    if not u > 0:
        msg = f"threshold u must be a positive real, got {u}"
        raise ParameterError(msg)
    points = grid.points
    theta = pairwise_extremal_coefficient(model, points[:, None, :], points[None, :, :])
    return float(np.mean(np.exp(-theta / u) - math.exp(-2.0 / u)))


def simulate_losses(model: ExtremalModel, grid: GridSpec, u: float, settings: MonteCarloSettings | None = None,
                    workers: int | None = None) -> np.ndarray:
    """settings.replicates loss samples, in replicate order."""
    settings = settings or MonteCarloSettings()
    chunks = [range(start, min(start + CHUNK_SIZE, settings.replicates))
              for start in range(0, settings.replicates, CHUNK_SIZE)]

    def run(replicates: range) -> tuple[list[float], float]:
        losses, bound = [], 0.0
        for replicate in replicates:
            field = simulate_field(model, grid, settings.seed, replicate, settings)
            losses.append(loss_sample(field, u).l_n)
            bound = max(bound, field.truncation_report.bound)
        logging.debug(f"replicates {replicates.start}-{replicates.stop - 1} of {model} done")
        return losses, bound

    results = parallel_map(run, chunks, workers)
    losses = np.array([loss for chunk, _ in results for loss in chunk])
    bound = max(b for _, b in results)
    logging.info(f"simulated {len(losses)} losses of {model} on {grid} at u={u} (truncation bound {bound:.3g})")
    return losses


def moments_from_losses(losses: np.ndarray) -> EmpiricalMoments:
    """Sample mean and variance with the jackknife standard error of the variance."""
    n = len(losses)
    if n < 2:
        msg = f"at least 2 losses are needed for a variance, got {n}"
        raise ParameterError(msg)

    mean = float(np.mean(losses))
    deviations = losses - mean
    squares = float(np.sum(deviations ** 2))
    variance = squares / (n - 1)
    if n == 2:
        return EmpiricalMoments(mean, variance, math.inf, math.sqrt(variance / n))

    leave_one_out = (squares - n / (n - 1) * deviations ** 2) / (n - 2)
    stderr = math.sqrt((n - 1) / n * float(np.sum((leave_one_out - leave_one_out.mean()) ** 2)))
    return EmpiricalMoments(mean, variance, stderr, math.sqrt(variance / n))


def empirical_var(model: ExtremalModel, grid: GridSpec, u: float, s: int, seed: int,
                  settings: MonteCarloSettings | None = None, workers: int | None = None) -> EmpiricalMoments:
    if s < 2:
        msg = f"at least 2 replicates are needed for a variance, got {s}"
        raise ParameterError(msg)
    settings = replace(settings or MonteCarloSettings(), replicates=s, seed=seed)
    return moments_from_losses(simulate_losses(model, grid, u, settings, workers))


def quantile_with_error(losses: np.ndarray, alpha: float) -> QuantileEstimate:
    """Lower empirical quantile inf{x: F(x) >= alpha} and half the width of its binomial rank band."""
    if not 0 < alpha < 1:
        msg = f"quantile level alpha must lie in (0, 1), got {alpha}"
        raise ParameterError(msg)
    ordered = np.sort(np.asarray(losses, dtype=float))
    count = len(ordered)
    if count == 0:
        msg = "no losses to take a quantile of"
        raise ParameterError(msg)

    rank = max(1, math.ceil(round(alpha * count, 9)))
    spread = math.sqrt(count * alpha * (1 - alpha))
    lower = min(max(math.floor(rank - spread), 1), count)
    upper = min(max(math.ceil(rank + spread), 1), count)
    return QuantileEstimate(float(ordered[rank - 1]), float(ordered[upper - 1] - ordered[lower - 1]) / 2)


def empirical_var_at_risk(model: ExtremalModel, grid: GridSpec, u: float, alpha: float, s: int, seed: int,
                          settings: MonteCarloSettings | None = None, workers: int | None = None) -> float:
    if s < 100:
        msg = f"at least 100 replicates are needed for an empirical VaR, got {s}"
        raise ParameterError(msg)
    settings = replace(settings or MonteCarloSettings(), replicates=s, seed=seed)
    return quantile_with_error(simulate_losses(model, grid, u, settings, workers), alpha).value


def empirical_extremal_coefficient(first: np.ndarray, second: np.ndarray, u: float) -> tuple[float, float]:
    """Θ̂ = -u log F̂(u, u) from paired replicates at two sites, with its delta-method standard error."""
    first, second = np.asarray(first, dtype=float), np.asarray(second, dtype=float)
    if first.shape != second.shape or first.ndim != 1:
        msg = f"paired samples must be 1-D arrays of the same length, got {first.shape} and {second.shape}"
        raise ParameterError(msg)

    joint = float(np.mean((first <= u) & (second <= u)))
    if not 0 < joint < 1:
        msg = f"joint empirical distribution function is {joint} at u={u}, choose another level"
        raise ParameterError(msg)
    stderr = u * math.sqrt((1 - joint) / (len(first) * joint))
    return -u * math.log(joint), stderr


def render_raster(field: FieldSample) -> str:
    """ESRI ASCII grid of the field (top row first), cells outside λA hold NODATA."""
    grid = field.grid
    cells = np.full(grid.mask.shape, NODATA)
    cells[grid.mask] = field.values
    x0, y0, _, _ = grid.scaled_region.bounds()

    lines = [
        f"# model: {field.model}",
        f"# seed: {field.seed} replicate: {field.replicate}",
        f"# truncation: {field.truncation_report}",
        f"ncols {grid.side_count}",
        f"nrows {grid.side_count}",
        f"xllcorner {x0:.17g}",
        f"yllcorner {y0:.17g}",
        f"cellsize {grid.cellsize:.17g}",
        f"NODATA_value {NODATA:.17g}",
    ]
    lines.extend(" ".join(f"{value:.17g}" for value in row) for row in cells[::-1])
    return "\n".join(lines) + "\n"


def write_raster(field: FieldSample, path: Path | str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        f.write(render_raster(field))
    logging.info(f"wrote {field.grid.side_count}x{field.grid.side_count} raster of {field.model} to {path}")


class Raster(NamedTuple):
    header: dict[str, float]
    comments: list[str]
    cells: np.ndarray


def read_raster(path: Path | str) -> Raster:
    """Inverse of write_raster; NODATA cells become NaN and rows are returned bottom row first."""
    header, comments, rows = {}, [], []
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line[0].isalpha():
                key, value = line.split()
                header[key] = float(value)
            else:
                rows.append([float(value) for value in line.split()])

    cells = np.array(rows[::-1])
    cells[cells == header["NODATA_value"]] = np.nan
    return Raster(header, comments, cells)
