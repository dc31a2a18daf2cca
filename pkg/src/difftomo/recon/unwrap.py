"""Phase unwrapping of a tilt series of phase projections.

Phase data carry each projection only modulo the period ``P = 2 pi / kappa``.
Unwrapping runs in two stages.

Stage 1 works inside each projection family.  Directions of one family that
are within ``epsilon`` of each other see the same pixel grid, and for an
object obeying the Itoh condition their projections differ by less than
``P / 2`` per pixel.  Walking a minimum spanning tree of the family's
epsilon-graph, each child is therefore shifted by the multiple of ``P``
nearest its parent.  Afterwards every direction of a tree shares one unknown
integer field ``K_c`` (the root's own offsets).

Stage 2 solves jointly for the object and the fields ``K_c``: the relaxed
least-squares problem is rounded, then refined by alternating a fixed-``K``
object fit with per-pixel rounding.  The fields are taken to vanish outside
the root's support box, which leaves only the origin voxel ambiguous (its
projection is a unit spike at the origin pixel of every direction); that
last multiple of ``P`` is fixed by the Itoh condition against its
neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree

from ..lattice import LatticeSpec, Object3D
from ..projector import Direction, Family, Projection2D, RayTransform, projection_matrix, support_mask
from ..tilt import TiltScheme, diversity_check, epsilon_graph, is_epsilon_connected


class UnwrapError(ValueError):
    pass


@dataclass
class UnwrapResult:
    projections: list
    object: Object3D
    offsets: np.ndarray
    residual: float
    iterations: int
    converged: bool
    components: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.projections, self.object))


def wrap(values, period: float) -> np.ndarray:
    """Reduce to ``(-period / 2, period / 2]``."""
    v = np.asarray(values, dtype=float)
    return v - period * np.ceil((v - period / 2) / period)


def wrap_projections(projections: Sequence[Projection2D]) -> list[Projection2D]:
    return [Projection2D(q.spec, q.direction, wrap(np.real(q.values), q.spec.period)) for q in projections]


def itoh_margin(obj: Object3D) -> float:
    """Largest difference between axis-adjacent voxels (zero padding included)."""
    v = np.pad(np.real(obj.values), 1)
    return float(max(np.abs(np.diff(v, axis=a)).max() for a in range(3)))


def _family_trees(scheme: TiltScheme):
    """Minimum spanning forests of the within-family epsilon-graph.

    Returns a list of ``(root, order, predecessors)`` with scheme indices.
    """
    adj = epsilon_graph(scheme).tocoo()
    u = scheme.unit_vectors()
    fam = np.array([d.family.value for d in scheme.directions])
    keep = fam[adj.row] == fam[adj.col]
    r, c = adj.row[keep], adj.col[keep]
    chord = np.linalg.norm(u[r] - u[c], axis=1)
    # tiny floor keeps zero-length edges from vanishing in the sparse graph
    w = 2 * np.arcsin(np.clip(chord / 2, 0, 1)) + 1e-300
    from scipy import sparse

    m = len(scheme)
    g = sparse.csr_matrix((w, (r, c)), shape=(m, m))
    tree = minimum_spanning_tree(g)
    tree = tree + tree.T
    ncomp, labels = connected_components(tree, directed=False)
    trees = []
    for k in range(ncomp):
        members = np.flatnonzero(labels == k)
        slopes = [max(abs(float(scheme.directions[i].alpha)), abs(float(scheme.directions[i].beta))) for i in members]
        root = int(members[int(np.argmin(slopes))])
        order, pred = breadth_first_order(tree, root, directed=False, return_predecessors=True)
        trees.append((root, order, pred))
    trees.sort(key=lambda t: (scheme.directions[t[0]].family.value, t[0]))
    return trees


def _spread_subset(dirs: Sequence[Direction], members, root: int, size: int):
    """Farthest-point sample of ``size`` members in slope space, starting at ``root``."""
    members = list(members)
    if len(members) <= size:
        return members
    pts = np.array([dirs[i].slopes for i in members])
    chosen = [members.index(root)]
    dist = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    while len(chosen) < size:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return [members[i] for i in sorted(chosen)]


def unwrap_tilt_series(
    wrapped,
    scheme: TiltScheme,
    spec: LatticeSpec,
    max_iters: int = 50,
    subset_size: int | None = None,
    tol: float = 1e-6,
) -> UnwrapResult:
    """Recover unwrapped projections and the object from wrapped phase data.

    ``wrapped`` maps each scheme direction to its :class:`Projection2D` of
    wrapped values (a sequence in scheme order is accepted too).  A constant
    offset of a multiple of the period on any projection is detected from
    the pixels outside its support box and removed first; the detected
    offsets are reported in ``offsets``.
    """
    if not is_epsilon_connected(scheme):
        raise UnwrapError("tilt scheme is not epsilon-connected")
    rep = diversity_check(scheme, spec)
    if not rep.satisfied:
        raise UnwrapError(f"tilt scheme fails the diversity condition (min gap {rep.min_node_gap:.3e})")
    dirs = list(scheme.directions)
    if isinstance(wrapped, Mapping):
        try:
            data = np.stack([np.real(wrapped[d].values) for d in dirs])
        except KeyError as exc:
            raise UnwrapError(f"no projection for direction {exc.args[0]}") from None
    else:
        wrapped = list(wrapped)
        if len(wrapped) != len(dirs):
            raise UnwrapError(f"expected {len(dirs)} projections, got {len(wrapped)}")
        data = np.stack([np.real(q.values) for q in wrapped])
    n, p = spec.n, spec.p
    P = spec.period

    # constant-offset detection on pixels that should be empty
    offsets = np.zeros(len(dirs))
    for t, d in enumerate(dirs):
        out = ~support_mask(d, spec)
        if out.any():
            offsets[t] = P * np.round(np.median(data[t][out]) / P)
    data = data - offsets[:, None, None]

    # stage 1: propagate along family spanning trees
    trees = _family_trees(scheme)
    unw = data.copy()
    comp_of = np.empty(len(dirs), dtype=int)
    for c, (root, order, pred) in enumerate(trees):
        comp_of[order] = c
        for child in order[1:]:
            parent = pred[child]
            unw[child] = data[child] + P * np.round((unw[parent] - data[child]) / P)

    # stage 2: joint fit of the object and one offset field per tree
    size = 2 * n if subset_size is None else subset_size
    subsets = [_spread_subset(dirs, order, root, size) for root, order, _ in trees]
    boxes = [np.flatnonzero(support_mask(dirs[root], spec).ravel()) for root, _, _ in trees]
    origin = 0  # wrapped index of pixel (0, 0)
    mats = {t: projection_matrix(dirs[t], spec) for s in subsets for t in s}
    rows = [(c, t) for c, s in enumerate(subsets) for t in s]
    a_obj = np.vstack([mats[t] for _, t in rows])
    rhs = np.concatenate([unw[t].ravel() for _, t in rows])

    # offset columns, gauge-fixed by dropping K_0 at the origin pixel
    kcols = []
    for c, box in enumerate(boxes):
        for pix in box:
            if not (c == 0 and pix == origin):
                kcols.append((c, pix))
    a_k = np.zeros((len(rows) * p * p, len(kcols)))
    col_index = {key: j for j, key in enumerate(kcols)}
    for r, (c, _) in enumerate(rows):
        for pix in boxes[c]:
            j = col_index.get((c, pix))
            if j is not None:
                a_k[r * p * p + pix, j] = -P
    sol = linalg.lstsq(np.hstack([a_obj, a_k]), rhs)[0]
    K = [np.zeros(p * p) for _ in trees]
    for (c, pix), v in zip(kcols, sol[n**3:]):
        K[c][pix] = np.round(v)

    fit = np.linalg.pinv(a_obj) if a_obj.shape[1] <= a_obj.shape[0] else None
    if fit is None:
        raise UnwrapError("stage-2 subset is too small to determine the object")

    def solve_object(K):
        target = rhs + P * np.concatenate([K[c] for c, _ in rows])
        return fit @ target

    iterations = 0
    f = solve_object(K)
    for iterations in range(1, max_iters + 1):
        pred_all = a_obj @ f
        newK = [k.copy() for k in K]
        for c, s in enumerate(subsets):
            idx = [r for r, (cc, _) in enumerate(rows) if cc == c]
            diff = np.mean([(pred_all[r * p * p:(r + 1) * p * p] - rhs[r * p * p:(r + 1) * p * p]) / P for r in idx], axis=0)
            newK[c][:] = 0
            newK[c][boxes[c]] = np.round(diff[boxes[c]])
        shift = newK[0][origin]
        for c in range(len(trees)):
            newK[c][origin] -= shift
        if all(np.array_equal(a, b) for a, b in zip(newK, K)):
            break
        K = newK
        f = solve_object(K)

    # origin voxel: fix its remaining multiple of P from its neighbours
    vol = f.reshape(n, n, n).copy()
    h = n // 2
    nb = [vol[h + dx, h + dy, h + dz] for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
          if 0 <= h + dx < n and 0 <= h + dy < n and 0 <= h + dz < n]
    if nb:
        q = np.round((np.mean(nb) - vol[h, h, h]) / P)
        vol[h, h, h] += P * q
        for k in K:
            k[origin] += q

    unwrapped = np.stack([unw[t] + P * K[comp_of[t]].reshape(p, p) for t in range(len(dirs))])
    reproj = RayTransform(spec, dirs).forward(vol)
    residual = float(np.linalg.norm(reproj - unwrapped) / max(np.linalg.norm(unwrapped), np.finfo(float).tiny))
    converged = residual < tol
    flags = [] if converged else [f"reprojection_residual:{residual:.3e}"]
    projs = [Projection2D(spec, d, unwrapped[t]) for t, d in enumerate(dirs)]
    comps = [[int(i) for i in order] for _, order, _ in trees]
    return UnwrapResult(projs, Object3D(spec, vol), offsets, residual, iterations, converged, comps, flags)
