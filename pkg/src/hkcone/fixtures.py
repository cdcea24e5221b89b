"""Named measure pairs reproducing the worked examples; written out by ``hkcone examples``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

from .geodesic import dirac_line_example
from .measure import DiscreteMeasure

__all__ = ["Fixture", "FIXTURES", "two_dirac", "mass_split", "two_dirac_closed_form", "mass_split_closed_form"]


@dataclass(frozen=True)
class Fixture:
    mu0: DiscreteMeasure
    mu1: DiscreteMeasure
    #: closed-form hk_sq at alpha = 1, beta = 4 when known
    hk_sq: Optional[float] = None


def two_dirac(L: float, a0: float, a1: float) -> Fixture:
    """``a0 delta_0`` against ``a1 delta_L`` on the line."""
    return Fixture(DiscreteMeasure([[0.0]], [a0]), DiscreteMeasure([[L]], [a1]),
                   two_dirac_closed_form(L, a0, a1))


def two_dirac_closed_form(L: float, a0: float, a1: float) -> float:
    return a0 + a1 - 2.0 * math.sqrt(a0 * a1) * math.cos(min(L, math.pi / 2))


def mass_split(a0: float, a1: float, b1: float, L: float) -> Fixture:
    """``a0 delta_0`` against ``a1 delta_0 + b1 delta_L`` (``L < pi/2``)."""
    return Fixture(DiscreteMeasure([[0.0]], [a0]), DiscreteMeasure([[0.0], [L]], [a1, b1]),
                   mass_split_closed_form(a0, a1, b1, L))


def mass_split_closed_form(a0: float, a1: float, b1: float, L: float) -> float:
    return a0 + a1 + b1 - 2.0 * math.sqrt(a0 * (a1 + b1 * math.cos(L) ** 2))


def _build() -> Dict[str, Fixture]:
    line, center = dirac_line_example()
    out = {
        "two_dirac_L1": two_dirac(1.0, 1.0, 1.0),
        "two_dirac_near": two_dirac(0.3, 1.0, 4.0),
        "two_dirac_far": two_dirac(2.0, 0.1, 10.0),
        "two_dirac_small_shift": two_dirac(0.1, 1.0, 1.0),
        "identical": Fixture(DiscreteMeasure([[0.0, 0.0], [1.0, 0.5]], [1.0, 2.0]),
                             DiscreteMeasure([[0.0, 0.0], [1.0, 0.5]], [1.0, 2.0]), 0.0),
        "mass_split": mass_split(1.0, 1.0, 1.0, 0.3),
        "mass_split_uneven": mass_split(2.0, 0.5, 3.0, 1.0),
        "two_by_two": Fixture(DiscreteMeasure([[0.0, 0.0], [0.8, 0.2]], [1.0, 0.5]),
                              DiscreteMeasure([[0.3, 0.4], [1.5, 0.0]], [2.0, 0.7])),
        "disjoint_far": Fixture(DiscreteMeasure([[0.0, 0.0], [0.0, 0.5]], [1.0, 3.0]),
                                DiscreteMeasure([[5.0, 0.0], [5.0, 1.0]], [2.0, 1.0]), 7.0),
        "dirac_line": Fixture(DiscreteMeasure.dirac(center, float(sum(
            math.cos(math.hypot(*x)) ** 2 for x in line.positions if math.hypot(*x) < math.pi / 2))), line),
    }
    return out


FIXTURES: Dict[str, Fixture] = _build()
