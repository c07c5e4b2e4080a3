"""
Scaling regime of the thin-slab problem.

A run is described by the pair (eps, eta): eps is the dimensionless anchoring
length and eta the relative thickness. Physical thin-film parameters (h, lambda)
map onto the pair via eps = sqrt(h / lambda), eta = h.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable

from slabvortex.constants import MAX_LINEAR_K

logger = logging.getLogger(__name__)


class InvalidParameterError(ValueError):
    """Raised when a scaling or grid parameter is outside its admissible range."""
    pass


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class ScalingParams:
    """
    The (eps, eta) pair of one run. Immutable and hashable.

    `bbh_regime` is a flag rather than a constraint: experiments may probe
    sqrt(2) * eta > eps on purpose, and callers assert the flag where needed.
    """
    eps: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "eps", _require_positive("eps", self.eps))
        object.__setattr__(self, "eta", _require_positive("eta", self.eta))

    def __str__(self) -> str:
        regime = "" if self.bbh_regime else " (outside regime)"
        return f"eps={self.eps:g}, eta={self.eta:g}{regime}"

    @property
    def bbh_regime(self) -> bool:
        """True iff sqrt(2) * eta <= eps."""
        # Compared squared so the equality case 2 h lambda = 1 is exact
        return 2.0 * self.eta * self.eta <= self.eps * self.eps * (1.0 + 1e-15)

    @property
    def k(self) -> float:
        """Ratio eta / eps (the slope of a linear schedule)."""
        return self.eta / self.eps

    def growth_factor(self) -> float:
        """Factor max(1, 2 eta^2 / eps^2) of the coupling bound outside the regime."""
        return max(1.0, 2.0 * self.eta ** 2 / self.eps ** 2)

    def sharp_bound_applies(self, c_star: float) -> bool:
        """Whether 2 eta^2 <= (1 - c_star) eps^2 for the sharper coupling bound."""
        if not 0.0 < c_star < 1.0:
            raise InvalidParameterError(f"c_star must lie in (0, 1), got {c_star!r}")
        return 2.0 * self.eta ** 2 <= (1.0 - c_star) * self.eps ** 2

    def to_physical(self) -> tuple[float, float]:
        """Inverse of from_physical: (h, lambda) = (eta, eta / eps^2)."""
        return self.eta, self.eta / self.eps ** 2

    def to_dict(self) -> dict:
        """JSON-serializable representation."""
        return {
            "eps": self.eps,
            "eta": self.eta,
            "k": self.k,
            "bbh_regime": self.bbh_regime,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingParams":
        """Reconstruct from dictionary."""
        return cls(eps=data["eps"], eta=data["eta"])


def from_physical(h: float, lam: float) -> ScalingParams:
    """
    Convert physical thin-film parameters to the scaling pair.

    Args:
        h: Film thickness (dimensionless), h > 0
        lam: Anchoring strength lambda(h), lam > 0

    Returns:
        ScalingParams with eps = sqrt(h / lam) and eta = h. The regime flag is
        set iff 2 h lam <= 1.

    Raises:
        InvalidParameterError: If either input is not positive
    """
    h = _require_positive("h", h)
    lam = _require_positive("lambda", lam)
    return ScalingParams(eps=math.sqrt(h / lam), eta=h)


def linear_schedule(k: float, eps_list: Iterable[float]) -> list[ScalingParams]:
    """
    Build the linear schedule eta = k * eps over a list of eps values.

    Raises:
        InvalidParameterError: If k is outside (0, 1/sqrt(2)] or any eps is not positive
    """
    k = float(k)
    if not (0.0 < k <= MAX_LINEAR_K * (1.0 + 1e-12)):
        raise InvalidParameterError(
            f"k must lie in (0, 1/sqrt(2)] for a linear schedule, got {k!r}"
        )
    schedule = [ScalingParams(eps=eps, eta=k * float(eps)) for eps in eps_list]
    for p in schedule:
        if not p.bbh_regime:
            # Only reachable through rounding at k = 1/sqrt(2)
            logger.warning("Linear schedule entry %s fell outside the regime", p)
    return schedule
