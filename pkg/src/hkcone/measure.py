"""Discrete measures on the base domain and on the cone.

Measures are immutable.  A :class:`DiscreteMeasure` is canonical on
construction: atoms with coincident positions are merged, atoms lighter
than ``MASS_FLOOR_REL * total`` are dropped, and the remaining atoms are
sorted lexicographically by position.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from .cone import ConePoint, Params, cone_cost
from .tolerances import MASS_FLOOR_REL

__all__ = [
    "DiscreteMeasure",
    "ConeMeasure",
    "ConePlan",
    "MeasureFormatError",
    "project",
    "special_lift",
    "dilate_plan",
    "normalize_plan",
    "total_mass",
    "merge_atoms",
    "measure_from_json",
    "measure_to_json",
    "load_measure",
    "save_measure",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _merge_exact(keys: np.ndarray, weights: np.ndarray):
    """Sum weights of identical rows of ``keys``; rows come back sorted."""
    if keys.shape[0] == 0:
        return keys, weights
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    summed = np.zeros(uniq.shape[0])
    np.add.at(summed, inv.ravel(), weights)
    return uniq, summed


@dataclass(frozen=True, init=False)
class DiscreteMeasure:
    """Finite weighted point cloud ``sum_i m_i delta_{x_i}`` in ``R^d``.

    Parameters
    ----------
    positions : array_like, shape (n, d)
    masses : array_like, shape (n,)
        Nonnegative masses.
    dim : int, optional
        Needed only when ``n == 0``.
    """

    positions: np.ndarray
    masses: np.ndarray

    def __init__(self, positions, masses, dim: Optional[int] = None):
        m = np.asarray(masses, dtype=float).reshape(-1)
        x = np.asarray(positions, dtype=float)
        if x.size == 0:
            if dim is None:
                dim = x.shape[1] if x.ndim == 2 else 1
            x = np.zeros((0, dim))
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if dim in (None, 1) else x.reshape(-1, dim)
        if x.ndim != 2 or x.shape[0] != m.shape[0]:
            raise ValueError(f"positions {x.shape} do not match masses {m.shape}")
        if dim is not None and x.shape[1] != dim:
            raise ValueError(f"positions have dimension {x.shape[1]}, expected {dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("positions must be finite")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("masses must be finite and >= 0")
        x, m = _merge_exact(x, m)
        total = float(m.sum())
        keep = m >= MASS_FLOOR_REL * total if total > 0 else np.zeros(m.shape, bool)
        keep &= m > 0
        object.__setattr__(self, "positions", _frozen(x[keep]))
        object.__setattr__(self, "masses", _frozen(m[keep]))

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0), dim=dim)

    @classmethod
    def dirac(cls, x, m: float = 1.0) -> "DiscreteMeasure":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x[None, :], [m])

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[Sequence[float], float]], dim: Optional[int] = None):
        atoms = list(atoms)
        if not atoms:
            return cls.zero(dim or 1)
        xs = np.array([np.atleast_1d(np.asarray(x, float)) for x, _ in atoms])
        return cls(xs, [m for _, m in atoms], dim=dim)

    # basic queries --------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n(self) -> int:
        return self.masses.shape[0]

    @property
    def atoms(self) -> List[Tuple[Tuple[float, ...], float]]:
        return [(tuple(x), float(m)) for x, m in zip(self.positions, self.masses)]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return DiscreteMeasure(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.masses, other.masses]),
            dim=self.dim,
        )

    def scaled(self, factor: float) -> "DiscreteMeasure":
        if factor < 0:
            raise ValueError("factor must be >= 0")
        return DiscreteMeasure(self.positions, factor * self.masses, dim=self.dim)

    def mapped(self, fn: Callable[[np.ndarray], np.ndarray]) -> "DiscreteMeasure":
        """Push forward under a map acting on the ``(n, d)`` position array."""
        return DiscreteMeasure(fn(self.positions), self.masses, dim=self.dim)

    def allclose(self, other: "DiscreteMeasure", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and self.n == other.n
            and np.allclose(self.positions, other.positions, rtol=rtol, atol=atol)
            and np.allclose(self.masses, other.masses, rtol=rtol, atol=atol)
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.masses, other.masses)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.positions.tobytes(), self.masses.tobytes()))

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={self.n}, dim={self.dim}, mass={self.total_mass:.6g})"


def total_mass(mu: DiscreteMeasure) -> float:
    return mu.total_mass


def merge_atoms(mu: DiscreteMeasure, radius: float = 0.0) -> DiscreteMeasure:
    """Merge atoms closer than ``radius`` into their mass-weighted barycenter.

    Clusters are the connected components of the graph linking atoms at
    distance ``<= radius`` (single linkage).  ``radius = 0`` keeps the
    exact-match canonical form.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0.0 or mu.n < 2:
        return mu
    labels = fcluster(linkage(pdist(mu.positions), method="single"), t=radius, criterion="distance")
    k = labels.max()
    mass = np.zeros(k)
    np.add.at(mass, labels - 1, mu.masses)
    moment = np.zeros((k, mu.dim))
    np.add.at(moment, labels - 1, mu.masses[:, None] * mu.positions)
    return DiscreteMeasure(moment / mass[:, None], mass, dim=mu.dim)


@dataclass(frozen=True, init=False)
class ConeMeasure:
    """Weighted atoms on the cone; all tip mass is collected in ``tip``.

    Parameters
    ----------
    positions : array_like, shape (n, d)
    radii : array_like, shape (n,)
        Radii; entries equal to zero are moved into the tip weight.
    weights : array_like, shape (n,)
    tip : float
        Additional weight sitting at the tip.
    """

    positions: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    tip: float

    def __init__(self, positions, radii, weights, tip: float = 0.0, dim: Optional[int] = None):
        r = np.asarray(radii, dtype=float).reshape(-1)
        w = np.asarray(weights, dtype=float).reshape(-1)
        x = np.asarray(positions, dtype=float)
        if x.size == 0:
            x = np.zeros((0, dim if dim is not None else (x.shape[1] if x.ndim == 2 else 1)))
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if dim in (None, 1) else x.reshape(-1, dim)
        if not (x.shape[0] == r.shape[0] == w.shape[0]):
            raise ValueError("positions, radii and weights must have the same length")
        if np.any(r < 0) or np.any(w < 0) or tip < 0:
            raise ValueError("radii and weights must be >= 0")
        at_tip = r == 0.0
        tip = float(tip) + float(w[at_tip].sum())
        keep = ~at_tip & (w > 0)
        keys, w = _merge_exact(np.column_stack([x[keep], r[keep]]), w[keep])
        object.__setattr__(self, "positions", _frozen(keys[:, :-1]))
        object.__setattr__(self, "radii", _frozen(keys[:, -1]))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "tip", tip)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Tuple[ConePoint, float]], dim: int) -> "ConeMeasure":
        xs, rs, ws, tip = [], [], [], 0.0
        for z, w in atoms:
            if z.is_tip:
                tip += w
            else:
                xs.append(z.position())
                rs.append(z.r)
                ws.append(w)
        return cls(np.array(xs).reshape(-1, dim), rs, ws, tip, dim=dim)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def atoms(self) -> List[Tuple[ConePoint, float]]:
        out = [(ConePoint(x, r), float(w)) for x, r, w in zip(self.positions, self.radii, self.weights)]
        if self.tip > 0:
            out.append((ConePoint.tip(), self.tip))
        return out

    @property
    def nontip_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def total_weight(self) -> float:
        return self.nontip_weight + self.tip

    @property
    def second_moment(self) -> float:
        return float(np.sum(self.weights * self.radii**2))

    def with_tip(self, extra: float) -> "ConeMeasure":
        return ConeMeasure(self.positions, self.radii, self.weights, self.tip + extra, dim=self.dim)

    def __add__(self, other: "ConeMeasure") -> "ConeMeasure":
        return ConeMeasure(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.radii, other.radii]),
            np.concatenate([self.weights, other.weights]),
            self.tip + other.tip,
            dim=self.dim,
        )


@dataclass(frozen=True, init=False)
class ConePlan:
    """Sparse coupling on cone x cone stored as ``(z0, z1, g)`` records.

    Internally the records are arrays; a radius of zero marks a tip and the
    corresponding position row is NaN.
    """

    x0: np.ndarray
    r0: np.ndarray
    x1: np.ndarray
    r1: np.ndarray
    g: np.ndarray

    def __init__(self, x0, r0, x1, r1, g, dim: Optional[int] = None):
        r0 = np.asarray(r0, dtype=float).reshape(-1)
        r1 = np.asarray(r1, dtype=float).reshape(-1)
        g = np.asarray(g, dtype=float).reshape(-1)
        k = g.shape[0]
        if dim is None:
            dim = np.asarray(x0).shape[-1] if np.asarray(x0).ndim == 2 else 1
        x0 = np.asarray(x0, dtype=float).reshape(k, dim)
        x1 = np.asarray(x1, dtype=float).reshape(k, dim)
        if np.any(g < 0) or np.any(r0 < 0) or np.any(r1 < 0):
            raise ValueError("masses and radii must be >= 0")
        keep = g > 0
        x0 = np.where((r0 == 0)[:, None], np.nan, x0)[keep]
        x1 = np.where((r1 == 0)[:, None], np.nan, x1)[keep]
        object.__setattr__(self, "x0", _frozen(x0))
        object.__setattr__(self, "r0", _frozen(r0[keep]))
        object.__setattr__(self, "x1", _frozen(x1))
        object.__setattr__(self, "r1", _frozen(r1[keep]))
        object.__setattr__(self, "g", _frozen(g[keep]))

    @classmethod
    def from_entries(cls, entries: Iterable[Tuple[ConePoint, ConePoint, float]], dim: int) -> "ConePlan":
        entries = list(entries)
        nan = np.full(dim, np.nan)
        x0 = [nan if z0.is_tip else z0.position() for z0, _, _ in entries]
        x1 = [nan if z1.is_tip else z1.position() for _, z1, _ in entries]
        return cls(
            np.array(x0).reshape(-1, dim),
            [z0.r for z0, _, _ in entries],
            np.array(x1).reshape(-1, dim),
            [z1.r for _, z1, _ in entries],
            [g for _, _, g in entries],
            dim=dim,
        )

    @property
    def dim(self) -> int:
        return self.x0.shape[1]

    def __len__(self) -> int:
        return self.g.shape[0]

    @property
    def entries(self) -> List[Tuple[ConePoint, ConePoint, float]]:
        out = []
        for x0, r0, x1, r1, g in zip(self.x0, self.r0, self.x1, self.r1, self.g):
            out.append((ConePoint(None if r0 == 0 else x0, r0), ConePoint(None if r1 == 0 else x1, r1), float(g)))
        return out

    def marginals(self) -> Tuple[ConeMeasure, ConeMeasure]:
        zero = np.nan_to_num(self.x0)
        one = np.nan_to_num(self.x1)
        return (
            ConeMeasure(zero, self.r0, self.g, dim=self.dim),
            ConeMeasure(one, self.r1, self.g, dim=self.dim),
        )

    def lengths(self) -> np.ndarray:
        """Euclidean lengths ``|x1 - x0|``; zero when either end is the tip."""
        both = (self.r0 > 0) & (self.r1 > 0)
        d = np.where(both[:, None], self.x1 - self.x0, 0.0)
        return np.sqrt(np.sum(d * d, axis=1))

    def squared_distances(self, p: Params = Params()) -> np.ndarray:
        p.require_positive()
        return cone_cost(self.lengths() ** 2, self.r0, self.r1, p) * np.ones(len(self))

    def cost(self, p: Params = Params()) -> float:
        """``sum g d_C(z0, z1)^2``."""
        return float(np.sum(self.g * self.squared_distances(p)))

    def concat(self, other: "ConePlan") -> "ConePlan":
        return ConePlan(
            np.vstack([self.x0, other.x0]),
            np.concatenate([self.r0, other.r0]),
            np.vstack([self.x1, other.x1]),
            np.concatenate([self.r1, other.r1]),
            np.concatenate([self.g, other.g]),
            dim=self.dim,
        )


def project(lam: ConeMeasure) -> DiscreteMeasure:
    """Projection ``sum w r^2 delta_x``; tip weight is discarded."""
    return DiscreteMeasure(lam.positions, lam.weights * lam.radii**2, dim=lam.dim)


def special_lift(mu: DiscreteMeasure, r_hat: Union[float, Sequence[float], Callable], kappa: float = 0.0) -> ConeMeasure:
    """Lift ``(x, m) -> ([x, r_hat(x)], m / r_hat(x)^2)`` plus ``kappa`` at the tip.

    ``r_hat`` may be a scalar, one value per atom (canonical atom order), or
    a callable on the ``(n, d)`` position array.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if callable(r_hat):
        r = np.asarray(r_hat(mu.positions), dtype=float).reshape(-1)
    else:
        r = np.broadcast_to(np.asarray(r_hat, dtype=float), (mu.n,))
    if np.any(~(r > 0)):
        raise ValueError("r_hat must be > 0 at every atom")
    return ConeMeasure(mu.positions, r, mu.masses / r**2, kappa, dim=mu.dim)


def dilate_plan(gamma: ConePlan, theta: Union[float, Sequence[float], Callable]) -> ConePlan:
    """Rescale each record by ``theta``: radii divided by it, mass multiplied by its square.

    ``theta`` is a scalar, one value per record, or a callable taking the
    arrays ``(x0, r0, x1, r1)`` and returning one value per record.
    """
    if callable(theta):
        t = np.asarray(theta(gamma.x0, gamma.r0, gamma.x1, gamma.r1), dtype=float)
    else:
        t = np.asarray(theta, dtype=float)
    t = np.broadcast_to(t, gamma.g.shape)
    if np.any(~(t > 0)):
        raise ValueError("theta must be > 0 for every record")
    return ConePlan(
        np.nan_to_num(gamma.x0), gamma.r0 / t, np.nan_to_num(gamma.x1), gamma.r1 / t,
        gamma.g * t * t, dim=gamma.dim,
    )


def normalize_plan(gamma: ConePlan, p: Params = Params()) -> ConePlan:
    """Canonical representative of a plan with the same projected geodesic.

    Records with both radii positive and scaled length below ``pi/2`` are
    rescaled by ``sqrt(r0 r1 cos l)``; records with scaled length at least
    ``pi/2`` or a tip at ``z1`` by ``r0``; records with a tip at ``z0`` by
    ``r1``.  Tip-tip records are dropped.
    """
    r0, r1 = gamma.r0, gamma.r1
    ell = p.scale * gamma.lengths()
    both = (r0 > 0) & (r1 > 0)
    inner = both & (ell < math.pi / 2)
    theta = np.ones_like(gamma.g)
    theta[inner] = np.sqrt(r0[inner] * r1[inner] * np.cos(ell[inner]))
    use_r0 = (both & ~inner) | ((r0 > 0) & (r1 == 0))
    theta[use_r0] = r0[use_r0]
    use_r1 = (r0 == 0) & (r1 > 0)
    theta[use_r1] = r1[use_r1]
    keep = (r0 > 0) | (r1 > 0)
    t = theta[keep]
    return ConePlan(
        np.nan_to_num(gamma.x0[keep]), r0[keep] / t, np.nan_to_num(gamma.x1[keep]), r1[keep] / t,
        gamma.g[keep] * t * t, dim=gamma.dim,
    )


# JSON ---------------------------------------------------------------------

class MeasureFormatError(ValueError):
    """Raised for malformed measure documents; the message names the field."""


def measure_from_json(doc, merge_radius: float = 0.0) -> DiscreteMeasure:
    if not isinstance(doc, dict):
        raise MeasureFormatError("top level: expected an object with 'dim' and 'atoms'")
    dim = doc.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise MeasureFormatError("dim: must be a positive integer")
    atoms = doc.get("atoms")
    if not isinstance(atoms, list):
        raise MeasureFormatError("atoms: must be a list")
    xs, ms = [], []
    for k, atom in enumerate(atoms):
        if not isinstance(atom, dict):
            raise MeasureFormatError(f"atoms[{k}]: must be an object")
        x, m = atom.get("x"), atom.get("m")
        if not isinstance(x, list) or len(x) != dim:
            raise MeasureFormatError(f"atoms[{k}].x: must be a list of {dim} numbers")
        try:
            xv = [float(v) for v in x]
        except (TypeError, ValueError):
            raise MeasureFormatError(f"atoms[{k}].x: must be a list of {dim} numbers") from None
        if not all(math.isfinite(v) for v in xv):
            raise MeasureFormatError(f"atoms[{k}].x: must be finite")
        if isinstance(m, bool) or not isinstance(m, (int, float)) or not math.isfinite(m):
            raise MeasureFormatError(f"atoms[{k}].m: must be a finite number")
        if m < 0:
            raise MeasureFormatError(f"atoms[{k}].m: must be >= 0")
        xs.append(xv)
        ms.append(float(m))
    mu = DiscreteMeasure(np.array(xs, dtype=float).reshape(-1, dim), ms, dim=dim)
    return merge_atoms(mu, merge_radius)


def measure_to_json(mu: DiscreteMeasure) -> dict:
    return {
        "dim": mu.dim,
        "atoms": [{"x": [float(v) for v in x], "m": float(m)} for x, m in zip(mu.positions, mu.masses)],
    }


def load_measure(path, merge_radius: float = 0.0) -> DiscreteMeasure:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MeasureFormatError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    return measure_from_json(doc, merge_radius)


def save_measure(mu: DiscreteMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(mu), fh, indent=1)
        fh.write("\n")
