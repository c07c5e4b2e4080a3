"""
Cell problem on a small cylinder with hedgehog lateral data and the core constant.

gamma(sigma, eps) is the minimal slab energy on B_sigma x (0, 1) with lateral
data (x/|x|, 0). Its renormalization tilde_gamma = gamma - pi log(sigma/eps)
is bounded and nonincreasing in sigma; along a linear schedule eta = k eps it
depends on sigma/eps only and tends to the core constant.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from slabvortex.constants import (
    DEFAULT_CORE_LAYERS,
    MIN_CELLS_PER_EPS,
    MIN_RESOLUTION,
    PLATEAU_SPREAD_WARNING,
    TILDE_GAMMA_WINDOW,
)
from slabvortex.domain import Disk, extrude, make_domain, power_law_datum
from slabvortex.models import CoreConstant, CoreSample, SolveOptions
from slabvortex.params import ScalingParams, linear_schedule
from slabvortex.solver import initial_director, minimize_full

logger = logging.getLogger(__name__)


class ResolutionError(ValueError):
    """Raised when the grid has fewer than MIN_CELLS_PER_EPS cells per eps."""
    pass


def core_energy(
    sigma: float,
    p: ScalingParams,
    resolution: int,
    opts: Optional[SolveOptions] = None,
    n_layers: int = DEFAULT_CORE_LAYERS,
    rotation: float = 0.0,
) -> CoreSample:
    """
    Solve the cell problem on Disk(sigma) x (0, 1).

    Args:
        sigma: Cylinder radius
        p: Scaling parameters
        resolution: Cells across the disk diameter
        opts: Solver options
        n_layers: Layers across the thickness
        rotation: Constant planar rotation of the hedgehog data

    Raises:
        ResolutionError: If eps / h < MIN_CELLS_PER_EPS with h = 2 sigma / resolution
        NoProgressError: Propagated from the solver
    """
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    h = 2.0 * sigma / resolution
    if p.eps / h < MIN_CELLS_PER_EPS:
        raise ResolutionError(
            f"{resolution} cells across B_{sigma:g} give eps/h = {p.eps / h:.3g}; "
            f"at least {MIN_CELLS_PER_EPS} cells per eps are required"
        )

    domain = make_domain(Disk(sigma), resolution)
    grid = extrude(domain, n_layers)
    hedgehog = power_law_datum(domain, 1, rotation)
    opts = opts or SolveOptions()
    init = initial_director(grid, hedgehog, noise=opts.init_noise, seed=opts.seed)
    _, report = minimize_full(init, hedgehog, p, opts)

    gamma_value = report.final_energy.total
    tilde = gamma_value - math.pi * math.log(sigma / p.eps)
    low, high = TILDE_GAMMA_WINDOW
    if not low <= tilde <= high:
        logger.warning("tilde gamma %.6g at sigma=%g, %s is outside [%g, %g]", tilde, sigma, p, low, high)
    logger.info("Core sigma=%g %s: gamma=%.8g tilde=%.8g", sigma, p, gamma_value, tilde)
    return CoreSample(sigma=float(sigma), params=p, gamma_value=gamma_value, tilde_gamma=tilde, report=report)


def _resolution_for(sigma: float, eps: float, cells_per_eps: float) -> int:
    return max(MIN_RESOLUTION, int(math.ceil(cells_per_eps * 2.0 * sigma / eps)))


def core_constant(
    k: float,
    ladder: Sequence[tuple[float, float]],
    cells_per_eps: float = MIN_CELLS_PER_EPS,
    opts: Optional[SolveOptions] = None,
    workers: int = 1,
    n_layers: int = DEFAULT_CORE_LAYERS,
) -> CoreConstant:
    """
    Estimate the core constant along a (sigma, eps) ladder at eta = k eps.

    The estimate is the mean of the last two tilde_gamma values; spread is
    their difference relative to max(|estimate|, 1). A ladder of one entry has
    infinite spread. Spreads above PLATEAU_SPREAD_WARNING are reported in the
    record's warnings.

    Raises:
        ResolutionError: If cells_per_eps is below MIN_CELLS_PER_EPS
        InvalidParameterError: If k is outside (0, 1/sqrt(2)]
    """
    if not ladder:
        raise ValueError("the core ladder is empty")
    if cells_per_eps < MIN_CELLS_PER_EPS:
        raise ResolutionError(f"cells_per_eps must be >= {MIN_CELLS_PER_EPS}, got {cells_per_eps!r}")
    sigmas = [float(s) for s, _ in ladder]
    schedule = linear_schedule(k, [float(e) for _, e in ladder])

    def run(entry: tuple[float, ScalingParams]) -> CoreSample:
        sigma, p = entry
        return core_energy(sigma, p, _resolution_for(sigma, p.eps, cells_per_eps), opts, n_layers)

    entries = list(zip(sigmas, schedule))
    if workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(run, entries))
    else:
        samples = [run(entry) for entry in entries]

    warnings = []
    tildes = [s.tilde_gamma for s in samples]
    if len(tildes) == 1:
        gamma, spread = tildes[0], math.inf
        warnings.append("a single ladder entry cannot show a plateau")
    else:
        gamma = 0.5 * (tildes[-1] + tildes[-2])
        spread = abs(tildes[-1] - tildes[-2]) / max(abs(gamma), 1.0)
        if spread > PLATEAU_SPREAD_WARNING:
            warnings.append(f"ladder has not plateaued: spread {spread:.1%} > {PLATEAU_SPREAD_WARNING:.0%}")
    for message in warnings:
        logger.warning("Core constant at k=%g: %s", k, message)

    result = CoreConstant(k=float(k), gamma=gamma, spread=spread, samples=tuple(samples), warnings=tuple(warnings))
    logger.info("%s", result)
    return result


def core_table(
    k_values: Sequence[float],
    ladder: Sequence[tuple[float, float]],
    cells_per_eps: float = MIN_CELLS_PER_EPS,
    opts: Optional[SolveOptions] = None,
    workers: int = 1,
    n_layers: int = DEFAULT_CORE_LAYERS,
) -> list[CoreConstant]:
    """gamma(k) for several slopes k, one ladder each; no interpretation across k."""
    return [core_constant(k, ladder, cells_per_eps, opts, workers, n_layers) for k in k_values]
