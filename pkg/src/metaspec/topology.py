"""Separating saddles, the minima labelling procedure, and merge trees.

The continuum procedure walks sublevel sets downward through the distinct
separating-saddle values; here it is realized discretely as a union-find
sweep over grid cells sorted by potential value (0-dimensional persistence),
with critical points snapped to their containing cells.  Each component-merge
event is matched back to an index-1 critical point, whose exact value then
replaces the grid-level estimate of sigma.

Every local minimum m_k receives a label (k_sigma, k_cc), the saddle value
sigma(k) of its critical component, the barrier S_k = sigma(k) - V(m_k), and
(generically) a unique assigned saddle.  A brute-force oracle recomputes the
pairing by labelling sublevel sets at a dense ladder of levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .potential import CriticalPoint, ScalarField


class GridResolutionError(RuntimeError):
    """The sampling grid cannot resolve the saddle structure."""


_STRUCTURES = {
    1: np.ones(3, dtype=int),
    2: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int),
}


@dataclass
class SampleGrid:
    """Uniform tensor grid with precomputed potential values."""

    axes: list
    values: np.ndarray

    @classmethod
    def from_box(cls, field: ScalarField, box, resolution=129) -> "SampleGrid":
        box = np.atleast_2d(np.asarray(box, dtype=float))
        if np.isscalar(resolution):
            resolution = [int(resolution)] * field.dimension
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(box, resolution)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        values = field.value_batch(pts).reshape([len(a) for a in axes])
        return cls(axes=axes, values=values)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacings(self):
        return [a[1] - a[0] for a in self.axes]

    def nearest_cell(self, point):
        idx = []
        for a, x in zip(self.axes, np.atleast_1d(point)):
            i = int(round((x - a[0]) / (a[1] - a[0])))
            if i < 0 or i >= len(a):
                raise GridResolutionError(f"point {point} is outside the grid")
            idx.append(i)
        return tuple(idx)

    def cell_center(self, idx):
        return np.array([a[i] for a, i in zip(self.axes, idx)])

    def components_below(self, level: float):
        """Label connected components of the strict sublevel set."""
        mask = self.values < level
        labels, count = ndimage.label(mask, structure=_STRUCTURES[self.dimension])
        return labels, count


@dataclass
class SaddleInfo:
    """Separation data for one index-1 critical point."""

    critical_point_id: int
    is_separating: bool
    descending_component_reps: tuple
    value: float


@dataclass
class LabelledMinimum:
    """A local minimum with its critical-component data."""

    minimum_id: int
    label: tuple
    sigma_k: float
    S_k: float
    assigned_saddle_id: int | None
    component_member_min_ids: list
    min_value: float
    min_location: np.ndarray
    boundary_saddle_ids: list = field(default_factory=list)

    @property
    def is_global(self) -> bool:
        return math.isinf(self.S_k)


@dataclass
class MergeTreeNode:
    minimum_id: int
    label: tuple
    birth_value: float
    death_value: float
    parent_minimum_id: int | None


@dataclass
class MergeTree:
    """Root-shaped component tree of the sublevel-set filtration."""

    nodes: list
    sigma_levels: list

    def to_json_dict(self) -> dict:
        def render(mid):
            node = self._by_id[mid]
            return {
                "minimum_id": node.minimum_id,
                "label": list(node.label),
                "birth_value": node.birth_value,
                "death_value": None if math.isinf(node.death_value) else node.death_value,
                "children": [render(c) for c in sorted(self._children.get(mid, []))],
            }

        self._by_id = {n.minimum_id: n for n in self.nodes}
        self._children: dict[int, list] = {}
        root = None
        for n in self.nodes:
            if n.parent_minimum_id is None:
                root = n.minimum_id
            else:
                self._children.setdefault(n.parent_minimum_id, []).append(n.minimum_id)
        return {
            "sigma_levels": [None if math.isinf(s) else s for s in self.sigma_levels],
            "root": render(root),
        }


def _order_key(p: CriticalPoint):
    # "lower" minimum = smaller value, ties broken by lexicographic location
    return (p.value, tuple(p.location))


def detect_separating_saddles(
    field: ScalarField,
    points: list[CriticalPoint],
    grid: SampleGrid,
    descent_radius_cells: float = 4.0,
) -> list[SaddleInfo]:
    """Classify each index-1 point as separating or not (Definition of ssp).

    Two descent seeds are placed at +/- r along the negative-curvature
    eigenvector; the saddle separates iff they land in different connected
    components of the discrete strict sublevel set just below the saddle
    value.
    """
    out = []
    r = descent_radius_cells * max(grid.spacings)
    for p in points:
        if p.morse_index != 1:
            continue
        eigval, eigvec = np.linalg.eigh(0.5 * (p.hessian + p.hessian.T))
        w = eigvec[:, 0]  # most negative curvature direction
        seeds = (p.location - r * w, p.location + r * w)
        seed_vals = [field.value(s) for s in seeds]
        if max(seed_vals) >= p.value:
            raise GridResolutionError(
                f"descent seeds at saddle {p.id} are not strictly below the "
                f"saddle value (grid too coarse or descent radius too large)"
            )
        # threshold halfway between the saddle and the higher seed: excludes
        # the saddle neck but keeps both seeds
        level = 0.5 * (p.value + max(seed_vals))
        labels, _ = grid.components_below(level)
        cells = [grid.nearest_cell(s) for s in seeds]
        l0, l1 = labels[cells[0]], labels[cells[1]]
        if l0 == 0 or l1 == 0:
            raise GridResolutionError(
                f"descent seed of saddle {p.id} fell outside the sublevel set"
            )
        out.append(
            SaddleInfo(
                critical_point_id=p.id,
                is_separating=bool(l0 != l1),
                descending_component_reps=(seeds[0].copy(), seeds[1].copy()),
                value=p.value,
            )
        )
    return out


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, i):
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union_into(self, child_root, parent_root):
        self.parent[child_root] = parent_root


def _sweep_merge_events(grid: SampleGrid, minima: list[CriticalPoint]):
    """Union-find pass over cells sorted by value; returns pairing events.

    Each event records the minimum whose component dies, the grid merge level,
    the merge cell, the members of the dying component, and the id of the
    surviving component's representative minimum at that time.
    """
    values = grid.values.ravel()
    shape = grid.shape
    order = np.lexsort((np.arange(values.size), values))
    rank_of = np.empty(values.size, dtype=np.int64)
    rank_of[order] = np.arange(values.size)

    min_cells = {}
    for m in minima:
        cell = grid.nearest_cell(m.location)
        flat = int(np.ravel_multi_index(cell, shape))
        if flat in min_cells:
            raise GridResolutionError(
                f"minima {min_cells[flat]} and {m.id} snap to the same grid cell"
            )
        min_cells[flat] = m.id

    by_id = {m.id: m for m in minima}
    uf = _UnionFind(values.size)
    added = np.zeros(values.size, dtype=bool)
    best: dict[int, int] = {}     # root -> minimum id (lowest in component)
    members: dict[int, list] = {}  # root -> minimum ids in component

    if grid.dimension == 1:
        strides = [1]
    else:
        strides = [shape[1], 1]

    events = []
    for flat in order:
        flat = int(flat)
        added[flat] = True
        root = flat
        best[root] = min_cells.get(flat)
        members[root] = [min_cells[flat]] if flat in min_cells else []

        idx = np.unravel_index(flat, shape)
        for axis, stride in enumerate(strides):
            for step in (-stride, stride):
                j = flat + step
                ii = idx[axis] + (1 if step > 0 else -1)
                if ii < 0 or ii >= shape[axis] or not added[j]:
                    continue
                ra, rb = uf.find(flat), uf.find(j)
                if ra == rb:
                    continue
                key = lambda mid: (np.inf,) if mid is None else _order_key(by_id[mid])
                if key(best[ra]) <= key(best[rb]):
                    survivor, dying = ra, rb
                else:
                    survivor, dying = rb, ra
                if best[dying] is not None:
                    events.append(
                        {
                            "dying_min": best[dying],
                            "level": float(values[flat]),
                            "cell": idx,
                            "members": sorted(members[dying]),
                            "into_min": best[survivor],
                        }
                    )
                uf.union_into(dying, survivor)
                members[survivor] = members[survivor] + members[dying]
                del members[dying], best[dying]

    return events


def _local_variation(grid: SampleGrid, cell) -> float:
    """Max |V(cell) - V(neighbor)| over face neighbors."""
    v0 = grid.values[cell]
    out = 0.0
    for axis in range(grid.dimension):
        for step in (-1, 1):
            nb = list(cell)
            nb[axis] += step
            if 0 <= nb[axis] < grid.shape[axis]:
                out = max(out, abs(float(grid.values[tuple(nb)]) - float(v0)))
    return out


def label_minima(
    field: ScalarField,
    points: list[CriticalPoint],
    saddles: list[SaddleInfo],
    grid: SampleGrid,
    sigma_tie_tol: float = 1e-9,
):
    """Run the labelling procedure; returns (records, merge_tree).

    Every local minimum gets exactly one record.  The global minimum (ties
    broken by lexicographic location) carries sigma = S = +inf and label
    (1, 1); every other minimum is paired with the exact value of the
    separating saddle at which its component merges into a deeper one.
    """
    minima = sorted((p for p in points if p.morse_index == 0), key=_order_key)
    if not minima:
        raise ValueError("labelling requires at least one local minimum")
    by_id = {p.id: p for p in points}
    separating = [s for s in saddles if s.is_separating]

    if len(minima) == 1:
        m = minima[0]
        rec = LabelledMinimum(
            minimum_id=m.id, label=(1, 1), sigma_k=math.inf, S_k=math.inf,
            assigned_saddle_id=None, component_member_min_ids=[m.id],
            min_value=m.value, min_location=m.location,
        )
        tree = MergeTree(
            nodes=[MergeTreeNode(m.id, (1, 1), m.value, math.inf, None)],
            sigma_levels=[math.inf],
        )
        return [rec], tree

    events = _sweep_merge_events(grid, minima)
    if len(events) != len(minima) - 1:
        raise GridResolutionError(
            f"expected {len(minima) - 1} merge events, saw {len(events)}: "
            "inconsistent component membership between successive levels "
            "(grid too coarse)"
        )

    # Match each merge event to a separating saddle; the exact critical value
    # replaces the grid estimate of sigma.
    used = set()
    for ev in events:
        tol = 4.0 * _local_variation(grid, ev["cell"]) + sigma_tie_tol
        cands = [s for s in separating if abs(s.value - ev["level"]) <= tol]
        if not cands:
            raise GridResolutionError(
                f"merge at level {ev['level']:.6g} matches no separating saddle "
                f"(tolerance {tol:.3g}); grid too coarse"
            )
        cell_xy = grid.cell_center(ev["cell"])
        sid = min(
            cands,
            key=lambda s: np.linalg.norm(by_id[s.critical_point_id].location - cell_xy),
        ).critical_point_id
        if sid in used:
            raise GridResolutionError(
                f"saddle {sid} matched twice; grid too coarse to separate events"
            )
        used.add(sid)
        ev["saddle_id"] = sid
        ev["sigma"] = by_id[sid].value

    # Distinct sigma levels in decreasing order (ties grouped within tol).
    sigmas = sorted({ev["sigma"] for ev in events}, reverse=True)
    levels = [math.inf]
    for s in sigmas:
        if not levels or all(abs(s - l) > sigma_tie_tol for l in levels[1:]):
            levels.append(s)

    def level_index(sig):
        for i, l in enumerate(levels[1:], start=2):
            if abs(sig - l) <= sigma_tie_tol:
                return i
        raise AssertionError("sigma not in level table")

    global_min = minima[0]
    records = [
        LabelledMinimum(
            minimum_id=global_min.id, label=(1, 1), sigma_k=math.inf, S_k=math.inf,
            assigned_saddle_id=None,
            component_member_min_ids=sorted(m.id for m in minima),
            min_value=global_min.value, min_location=global_min.location,
        )
    ]
    # within a level, components are ordered by their representative minimum
    per_level: dict[int, list] = {}
    for ev in sorted(events, key=lambda e: _order_key(by_id[e["dying_min"]])):
        k_sigma = level_index(ev["sigma"])
        per_level.setdefault(k_sigma, []).append(ev)
    for k_sigma, level_events in sorted(per_level.items()):
        for k_cc, ev in enumerate(level_events, start=1):
            m = by_id[ev["dying_min"]]
            records.append(
                LabelledMinimum(
                    minimum_id=m.id, label=(k_sigma, k_cc),
                    sigma_k=ev["sigma"], S_k=ev["sigma"] - m.value,
                    assigned_saddle_id=ev["saddle_id"],
                    component_member_min_ids=ev["members"],
                    min_value=m.value, min_location=m.location,
                )
            )

    # Which separating saddles sit on the top-level boundary of each
    # component: test whether a descent seed lands in the component of m_k
    # just below its sigma level.
    seed_cache: dict[float, tuple] = {}
    for rec in records[1:]:
        level_saddles = [
            s for s in separating if abs(s.value - rec.sigma_k) <= sigma_tie_tol
        ]
        delta = 0.5 * min(
            rec.sigma_k - max(field.value(r) for r in s.descending_component_reps)
            for s in level_saddles
        )
        thr = rec.sigma_k - delta
        if thr not in seed_cache:
            seed_cache[thr] = grid.components_below(thr)
        labels, _ = seed_cache[thr]
        comp = labels[grid.nearest_cell(rec.min_location)]
        touching = []
        for s in level_saddles:
            for rep in s.descending_component_reps:
                if labels[grid.nearest_cell(rep)] == comp:
                    touching.append(s.critical_point_id)
                    break
        rec.boundary_saddle_ids = sorted(touching)

    parent_of = {ev["dying_min"]: ev["into_min"] for ev in events}
    label_of = {r.minimum_id: r.label for r in records}
    nodes = [
        MergeTreeNode(
            minimum_id=r.minimum_id, label=r.label, birth_value=r.min_value,
            death_value=r.sigma_k, parent_minimum_id=parent_of.get(r.minimum_id),
        )
        for r in records
    ]
    tree = MergeTree(nodes=nodes, sigma_levels=levels)
    return records, tree


def brute_force_pairing(
    field: ScalarField,
    points: list[CriticalPoint],
    grid: SampleGrid,
    level_samples: int = 1000,
    level_range: tuple | None = None,
) -> dict:
    """Oracle pairing: scan a ladder of levels, labelling sublevel sets anew.

    For each non-global minimum, returns the smallest sampled level at which
    its component contains a strictly lower minimum (value ties broken
    lexicographically).  Accuracy is one level step.
    """
    if level_samples < 200:
        raise ValueError("level_samples must be at least 200")
    minima = sorted((p for p in points if p.morse_index == 0), key=_order_key)
    if level_range is None:
        saddle_vals = [p.value for p in points if p.morse_index == 1]
        top = max(saddle_vals) if saddle_vals else max(p.value for p in minima)
        lo = min(p.value for p in minima)
        span = max(top - lo, 1e-12)
        level_range = (lo + 1e-9 * span, top + 0.05 * span)
    levels = np.linspace(level_range[0], level_range[1], level_samples)

    cells = {m.id: grid.nearest_cell(m.location) for m in minima}
    order = {m.id: i for i, m in enumerate(minima)}  # 0 = global minimum
    sigma: dict[int, float] = {}
    for level in levels:
        if len(sigma) == len(minima) - 1:
            break
        labels, _ = grid.components_below(float(level))
        comp = {mid: labels[c] for mid, c in cells.items()}
        for m in minima[1:]:
            if m.id in sigma or comp[m.id] == 0:
                continue
            mates = [
                mid for mid in comp
                if comp[mid] == comp[m.id] and order[mid] < order[m.id]
            ]
            if mates:
                sigma[m.id] = float(level)
    return sigma


def is_generic(labelling: list[LabelledMinimum], saddles: list[SaddleInfo], tol: float):
    """Genericity test; returns (flag, violations).

    Generic means: unique minimum per critical component (value gap > tol),
    one component split per saddle level, and exactly one separating saddle
    on the top boundary of each component.
    """
    violations = []
    values = {r.minimum_id: r.min_value for r in labelling}

    for rec in labelling:
        member_vals = sorted(values[mid] for mid in rec.component_member_min_ids
                             if mid in values)
        if len(member_vals) > 1 and member_vals[1] - member_vals[0] <= tol:
            violations.append(
                f"component {rec.label}: minimum value attained at multiple minima "
                f"(gap {member_vals[1] - member_vals[0]:.3g} <= tol)"
            )

    finite = [r for r in labelling if not math.isinf(r.sigma_k)]
    by_level: dict[int, list] = {}
    for r in finite:
        by_level.setdefault(r.label[0], []).append(r)
    for k_sigma, recs in sorted(by_level.items()):
        if len(recs) > 1:
            violations.append(
                f"level {k_sigma} (sigma = {recs[0].sigma_k:.6g}): simultaneous "
                f"split into {len(recs) + 1} components"
            )

    for rec in finite:
        if len(rec.boundary_saddle_ids) != 1:
            violations.append(
                f"component {rec.label}: {len(rec.boundary_saddle_ids)} equal-value "
                f"separating saddles {rec.boundary_saddle_ids} on its top boundary"
            )

    sep_vals = sorted((s.value, s.critical_point_id) for s in saddles if s.is_separating)
    for (v1, i1), (v2, i2) in zip(sep_vals, sep_vals[1:]):
        if v2 - v1 <= tol:
            violations.append(
                f"separating saddles {i1} and {i2} have equal values "
                f"(gap {v2 - v1:.3g} <= tol)"
            )

    # deduplicate while keeping order
    seen = set()
    violations = [v for v in violations if not (v in seen or seen.add(v))]
    return (not violations), violations


@dataclass
class GapFlags:
    fa1_holds: bool
    fa2_holds: bool
    S_gap: float


def gap_conditions(labelling: list[LabelledMinimum], tol: float = 1e-9) -> GapFlags:
    """Check the weak-genericity gap conditions on the largest finite barrier."""
    finite = [r for r in labelling if not math.isinf(r.S_k)]
    if len(labelling) < 2:
        raise ValueError("gap conditions require at least two minima")
    finite.sort(key=lambda r: -r.S_k)
    top = finite[0]
    rest = finite[1:]
    s_gap = top.S_k - rest[0].S_k if rest else math.inf
    fa1 = s_gap > tol
    fa2 = len(top.boundary_saddle_ids) == 1
    return GapFlags(fa1_holds=fa1, fa2_holds=fa2, S_gap=s_gap)
