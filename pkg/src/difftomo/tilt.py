"""Tilt schemes, the epsilon-connectivity graph and the diversity condition.

Projections of one family with slopes ``(alpha_l, beta_l)`` give, at each
nonzero frequency ``(xi, eta)``, a Vandermonde system in the nodes
``exp(-2 pi i (alpha_l xi + beta_l eta) / p)``.  The scheme is *diverse* when
those nodes are pairwise distinct for every frequency.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import kernels
from .lattice import LatticeSpec, centered_range
from .projector import Direction, Family

DEFAULT_TOL = 1e-9


class NearSingularError(ValueError):
    """Vandermonde nodes too close to solve reliably."""

    def __init__(self, message, min_gap):
        super().__init__(message)
        self.min_gap = min_gap


@dataclass(frozen=True, eq=False)
class TiltScheme:
    """Ordered, duplicate-free list of directions with an angular threshold."""

    directions: tuple
    epsilon: float
    seed: int | None = None

    def __post_init__(self):
        dirs = tuple(self.directions)
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        seen = set()
        for d in dirs:
            key = (d.family, float(d.alpha), float(d.beta))
            if key in seen:
                raise ValueError(f"duplicate direction {d}")
            seen.add(key)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    def __len__(self):
        return len(self.directions)

    def __iter__(self):
        return iter(self.directions)

    def family(self, fam: Family) -> list[Direction]:
        return [d for d in self.directions if d.family is fam]

    def unit_vectors(self) -> np.ndarray:
        return np.array([d.unit_vector() for d in self.directions]).reshape(-1, 3)


@dataclass(frozen=True)
class DiversityReport:
    satisfied: bool
    worst_pair: tuple = ()
    min_node_gap: float = math.inf
    family: Family | None = None


def default_epsilon(n: int) -> float:
    return 0.5 / n


def _dedup(directions) -> list[Direction]:
    out, seen = [], set()
    for d in directions:
        key = (d.family, float(d.alpha), float(d.beta))
        if key not in seen:
            seen.add(key)
            out.append(d)
    return out


def _open_uniform(rng, size, lo=-1.0, hi=1.0):
    """Uniform draws with the lower endpoint excluded as well."""
    x = rng.uniform(lo, hi, size)
    while np.any(x == lo):
        bad = x == lo
        x[bad] = rng.uniform(lo, hi, int(bad.sum()))
    return x


def random_tilt_scheme(
    n: int,
    count: int,
    seed: int,
    region: str = "unit_square",
    anchors: bool = False,
    epsilon: float | None = None,
    anchor_beta: float | None = None,
) -> TiltScheme:
    """``count`` i.i.d. random directions, optionally plus the two anchors.

    Regions
    -------
    ``unit_square``
        family X with ``alpha, beta`` uniform on ``[0, 1)``.
    ``square``
        family X with ``alpha, beta`` uniform on ``(-1, 1)``.
    ``triangle``
        uniform on the spherical triangle with vertices at the three
        coordinate axes (the positive octant of the sphere).

    With ``anchors`` the directions ``(0, 1, beta_0)`` and ``(0, 0, 1)`` are
    appended; ``beta_0`` is drawn from ``[0, 1)`` unless given.
    """
    if count < n:
        raise ValueError(f"count must be >= n = {n}, got {count}")
    rng = np.random.default_rng(seed)
    if region == "unit_square":
        ab = rng.uniform(0.0, 1.0, (count, 2))
        dirs = [Direction.x(a, b) for a, b in ab]
    elif region == "square":
        ab = _open_uniform(rng, (count, 2))
        dirs = [Direction.x(a, b) for a, b in ab]
    elif region == "triangle":
        v = np.abs(rng.standard_normal((count, 3)))
        dirs = [Direction.from_vector(u) for u in v]
    else:
        raise ValueError(f"unknown region {region!r}")
    if anchors:
        b0 = rng.uniform(0.0, 1.0) if anchor_beta is None else float(anchor_beta)
        dirs += [Direction.y(0.0, b0), Direction.z(0.0, 0.0)]
    eps = default_epsilon(n) if epsilon is None else epsilon
    return TiltScheme(tuple(_dedup(dirs)), eps, seed)


def anchor_direction(alpha0: float, beta0: float) -> Direction:
    """The anchor ``(0, alpha0, beta0)``; warns when ``alpha0`` is nearly zero."""
    if alpha0 == 0:
        raise ValueError("anchor requires alpha0 != 0")
    if abs(alpha0) < 1e-3:
        warnings.warn(f"anchor alpha0={alpha0} is close to zero", stacklevel=2)
    return Direction.from_vector((0.0, alpha0, beta0))


def tset_scheme(n: int, seed: int, epsilon: float | None = None) -> TiltScheme:
    """``3n`` directions, ``n`` per family, slopes i.i.d. uniform on ``(-1, 1)``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    dirs = []
    for fam in Family:
        ab = _open_uniform(rng, (n, 2))
        dirs += [Direction(fam, a, b) for a, b in ab]
    eps = default_epsilon(n) if epsilon is None else epsilon
    return TiltScheme(tuple(dirs), eps, seed)


CONE_AXIS = np.ones(3) / math.sqrt(3.0)
CONE_RANGE = 4 * math.pi / 3


def conical_orbit(count: int) -> np.ndarray:
    """``count`` unit vectors from ``(1,0,0)`` to ``(0,0,1)`` about ``(1,1,1)``."""
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    theta = np.linspace(0.0, CONE_RANGE, count)
    v = np.array([1.0, 0.0, 0.0])
    k = CONE_AXIS
    # Rodrigues rotation of v about k
    par = k * (k @ v)
    perp = v - par
    cross = np.cross(k, v)
    u = par + np.cos(theta)[:, None] * perp + np.sin(theta)[:, None] * cross
    return np.where(np.abs(u) < 1e-15, 0.0, u)


def conical_tilt_scheme(count: int, epsilon: float | None = None) -> TiltScheme:
    """Equally spaced directions along the conical orbit through the axes."""
    if count < 3:
        raise ValueError(f"count must be >= 3, got {count}")
    dirs = _dedup(Direction.from_vector(u) for u in conical_orbit(count))
    eps = 2 * CONE_RANGE / (count - 1) if epsilon is None else epsilon
    return TiltScheme(tuple(dirs), eps)


def dual_axis_scheme(q: int, alpha: float, epsilon: float | None = None) -> TiltScheme:
    """Four arcs of ``q + 1`` directions each, duplicates removed.

    ``(1, l/q, alpha)``, ``(l/q, 1, alpha)``, ``(0, 1, l/q)``, ``(0, l/q, 1)``
    for ``l = 0..q``.  Vectors with two unit entries are assigned to the
    first such family with the slope nudged just inside 1.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    s = [l / q for l in range(q + 1)]
    vecs = [(1, t, alpha) for t in s]
    vecs += [(t, 1, alpha) for t in s]
    vecs += [(0, 1, t) for t in s]
    vecs += [(0, t, 1) for t in s]
    dirs = _dedup(Direction.from_vector(v) for v in vecs)
    eps = 2 * (math.pi / 2) / q if epsilon is None else epsilon
    return TiltScheme(tuple(dirs), eps)


def orbit_length(vectors) -> float:
    """Polyline length of a sequence of unit vectors."""
    v = np.asarray(vectors, dtype=float)
    return float(np.linalg.norm(np.diff(v, axis=0), axis=1).sum())


def epsilon_graph(scheme: TiltScheme) -> sparse.csr_matrix:
    """Symmetric boolean adjacency: edge iff the angle is at most ``epsilon``."""
    u = scheme.unit_vectors()
    m = len(u)
    chord = 2 * math.sin(min(scheme.epsilon, math.pi) / 2)
    pairs = cKDTree(u).query_pairs(chord * (1 + 1e-12), output_type="ndarray")
    if len(pairs):
        # the KD query uses chord length; confirm with the angle itself
        cr = np.linalg.norm(u[pairs[:, 0]] - u[pairs[:, 1]], axis=1)
        ang = 2 * np.arcsin(np.clip(cr / 2, 0, 1))
        pairs = pairs[ang <= scheme.epsilon]
    i = np.concatenate([pairs[:, 0], pairs[:, 1]]) if len(pairs) else np.empty(0, int)
    j = np.concatenate([pairs[:, 1], pairs[:, 0]]) if len(pairs) else np.empty(0, int)
    return sparse.csr_matrix((np.ones(len(i), dtype=bool), (i, j)), shape=(m, m))


def is_epsilon_connected(scheme: TiltScheme) -> bool:
    if len(scheme) == 0:
        raise ValueError("empty scheme")
    ncomp, _ = connected_components(epsilon_graph(scheme), directed=False)
    return ncomp == 1


def node_exponents(directions: Sequence[Direction], xi, eta) -> np.ndarray:
    """``alpha_l xi + beta_l eta`` with shape ``(..., m)``."""
    a = np.array([float(d.alpha) for d in directions])
    b = np.array([float(d.beta) for d in directions])
    return np.asarray(xi, dtype=float)[..., None] * a + np.asarray(eta, dtype=float)[..., None] * b


def _min_gaps(u: np.ndarray, p: int):
    """Smallest pairwise unit-circle distance per row and the pair attaining it."""
    z = np.exp(-2j * np.pi * u / p)
    d = np.abs(z[..., :, None] - z[..., None, :])
    m = u.shape[-1]
    d[..., np.arange(m), np.arange(m)] = np.inf
    flat = d.reshape(*d.shape[:-2], m * m)
    arg = flat.argmin(axis=-1)
    return flat.min(axis=-1), arg // m, arg % m


def diversity_check(scheme: TiltScheme, spec: LatticeSpec, tol: float = DEFAULT_TOL, family: Family | None = None) -> DiversityReport:
    """Check that the Vandermonde nodes of one family are pairwise distinct.

    The family defaults to the one with the most directions (X, Y, Z
    breaking ties).  Every direction of that family enters the check.
    """
    n, p = spec.n, spec.p
    if family is None:
        family = max(Family, key=lambda f: (len(scheme.family(f)), -f.value))
    dirs = scheme.family(family)
    if len(dirs) < n:
        raise ValueError(f"need at least n = {n} directions in one family, family {family.name} has {len(dirs)}")
    if len(dirs) < 2:
        return DiversityReport(True, (), math.inf, family)
    f = centered_range(p)
    xi, eta = np.meshgrid(f, f, indexing="ij")
    keep = (xi != 0) | (eta != 0)
    xi, eta = xi[keep], eta[keep]
    u = node_exponents(dirs, xi, eta)
    gaps, i, j = _min_gaps(u, p)
    w = int(np.argmin(gaps))
    gap = float(gaps[w])
    ok = bool(np.all(gaps > tol))
    worst = ((int(xi[w]), int(eta[w])), (int(i[w]), int(j[w]))) if not ok else ()
    return DiversityReport(ok, worst, gap, family)


def _dense_solve(zpow: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if zpow.shape[-2] == zpow.shape[-1]:
        return np.linalg.solve(zpow, rhs[..., None])[..., 0]
    return np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(zpow, rhs)])


def vandermonde_solve_batch(nodes, rhs, spec: LatticeSpec, tol: float = DEFAULT_TOL, rtol: float = 1e-8) -> np.ndarray:
    """Batched :func:`vandermonde_solve`; ``nodes`` and ``rhs`` are ``(batch, m)``.

    Square systems use Björck–Pereyra; rows whose residual exceeds
    ``rtol * ||rhs||`` are re-solved densely.  Overdetermined systems
    (``m > n``) go straight to least squares.
    """
    n, p = spec.n, spec.p
    u = np.atleast_2d(np.asarray(nodes, dtype=float))
    b = np.atleast_2d(np.asarray(rhs, dtype=complex))
    if u.shape != b.shape:
        raise ValueError(f"nodes {u.shape} and rhs {b.shape} differ in shape")
    m = u.shape[1]
    if m < n:
        raise ValueError(f"need at least n = {n} nodes, got {m}")
    if m > 1:
        gaps, _, _ = _min_gaps(u, p)
        g = float(gaps.min())
        if not g > tol:
            raise NearSingularError(f"Vandermonde nodes nearly coincide (min gap {g:.3e} <= {tol:.1e})", g)
    z = np.exp(-2j * np.pi * u / p)
    j0 = -(n // 2)
    zpow = z[:, :, None] ** centered_range(n)[None, None, :]
    if m == n:
        x = kernels.bjorck_pereyra(z, b * z ** (-j0))
        res = np.linalg.norm(np.einsum("sij,sj->si", zpow, x) - b, axis=1)
        bad = res > rtol * np.maximum(np.linalg.norm(b, axis=1), np.finfo(float).tiny)
        if np.any(bad):
            x[bad] = _dense_solve(zpow[bad], b[bad])
        return x
    return _dense_solve(zpow, b)


def vandermonde_solve(nodes, rhs, spec: LatticeSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve ``sum_{j in Z_n} exp(-2 pi i u_l j / p) x_j = rhs_l``.

    ``x`` is returned in ascending ``j`` order.  Raises
    :class:`NearSingularError` when two nodes are within ``tol`` on the unit
    circle.
    """
    return vandermonde_solve_batch(np.asarray(nodes)[None], np.asarray(rhs)[None], spec, tol)[0]


def write_scheme(path, scheme: TiltScheme) -> None:
    """Text format: ``epsilon=``/``seed=`` headers, then ``family alpha beta`` lines."""
    lines = [f"epsilon={scheme.epsilon!r}"]
    if scheme.seed is not None:
        lines.append(f"seed={scheme.seed}")
    for d in scheme.directions:
        lines.append(f"{d.family.name} {float(d.alpha)!r} {float(d.beta)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_scheme(path) -> TiltScheme:
    eps, seed, dirs = None, None, []
    for num, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, val = (s.strip() for s in line.partition("="))
            if key == "epsilon":
                eps = float(val)
            elif key == "seed":
                seed = int(val)
            else:
                raise ValueError(f"{path}:{num}: unknown header {key!r}")
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{num}: expected 'family alpha beta', got {raw!r}")
        try:
            dirs.append(Direction(Family[parts[0].upper()], float(parts[1]), float(parts[2])))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{num}: {exc}") from exc
    if eps is None:
        raise ValueError(f"{path}: missing epsilon= header")
    return TiltScheme(tuple(dirs), eps, seed)
