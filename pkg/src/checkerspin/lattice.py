"""Checkerboard lattices, frustrated boxes and reflection cuts.

A *box* is a crossed square plaquette: four sites, four edges and both
diagonals, all antiferromagnetic.  Site indexing is row-major over the grid
and boxes are indexed by the lower-left corner of their plaquette, so a given
spec always produces the identical graph.

Bond bookkeeping: for the ``checkerboard`` kinds every bond entry belongs to
exactly one box and carries coupling 1.  On very small tori two different
boxes can contain the same *pair of sites* (e.g. 4x2 fully periodic, where a
vertical edge and a wrap-around edge coincide); those stay separate bond
entries tagged by their box, and couplings are additive in the Hamiltonian.
For ``all_crossed`` every plaquette is a box, so axis-parallel bonds are
shared by two boxes and are stored once with coupling 2.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


class LatticeError(ValueError):
    pass


KINDS = ("single_box", "checkerboard", "all_crossed", "cubic_variant")


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    coupling: float
    box: int | None = None


@dataclass(frozen=True)
class Box:
    sites: tuple  # (lower-left, lower-right, upper-left, upper-right)
    pos: tuple    # plaquette position


@dataclass
class LatticeSpec:
    kind: str
    extent: tuple = (2, 2)
    periodic: tuple = (False, False)
    crossed_parity: int = 0
    coupling_scale: float = 1.0

    @classmethod
    def from_json(cls, text_or_dict):
        data = json.loads(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
        return cls(
            kind=data["kind"],
            extent=tuple(data.get("extent", (2, 2))),
            periodic=tuple(bool(p) for p in data.get("periodic", (False, False))),
            crossed_parity=int(data.get("crossed_parity", 0)),
            coupling_scale=float(data.get("coupling_scale", 1.0)),
        )

    def to_json(self):
        return {
            "kind": self.kind,
            "extent": list(self.extent),
            "periodic": list(self.periodic),
            "crossed_parity": self.crossed_parity,
            "coupling_scale": self.coupling_scale,
        }


@dataclass
class LatticeGraph:
    kind: str
    extent: tuple
    periodic: tuple
    crossed_parity: int
    coupling_scale: float
    n_sites: int
    bonds: tuple
    boxes: tuple
    coords: tuple  # site index -> coordinate tuple

    @property
    def n_boxes(self) -> int:
        return len(self.boxes)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def site_index(self, coord) -> int:
        return self.coords.index(tuple(coord))

    def boxes_of_site(self, site: int):
        return [b for b, box in enumerate(self.boxes) if site in box.sites]

    def every_site_in_two_boxes(self) -> bool:
        counts = Counter()
        for box in self.boxes:
            counts.update(box.sites)
        return all(counts[s] == 2 for s in range(self.n_sites))

    def to_json(self):
        return {
            "kind": self.kind,
            "extent": list(self.extent),
            "periodic": list(self.periodic),
            "crossed_parity": self.crossed_parity,
            "coupling_scale": self.coupling_scale,
            "n_sites": self.n_sites,
            "sites": [list(c) for c in self.coords],
            "bonds": [{"i": b.i, "j": b.j, "coupling": b.coupling, "box": b.box}
                      for b in self.bonds],
            "boxes": [{"sites": list(b.sites), "pos": list(b.pos)} for b in self.boxes],
        }


@dataclass
class CutBox:
    box: int
    left_pair: tuple
    right_pair: tuple


@dataclass
class ReflectionCut:
    axis: int
    position: int
    lines: tuple
    left_sites: tuple
    right_sites: tuple
    mirror: dict = field(repr=False)
    cut_boxes: tuple = ()

    @property
    def n_left(self) -> int:
        return len(self.left_sites)


def _box_pairs(sites):
    """All 6 internal bonds of a box: 4 edges plus both diagonals."""
    ll, lr, ul, ur = sites
    return [(ll, lr), (ul, ur), (ll, ul), (lr, ur), (ll, ur), (lr, ul)]


def _plaquette_sites(x, y, lx, ly, px, py, site_of, z=None):
    x1 = (x + 1) % lx if px else x + 1
    y1 = (y + 1) % ly if py else y + 1
    if z is None:
        return (site_of(x, y), site_of(x1, y), site_of(x, y1), site_of(x1, y1))
    return (site_of(x, y, z), site_of(x1, y, z), site_of(x, y1, z), site_of(x1, y1, z))


def build_lattice(spec: LatticeSpec) -> LatticeGraph:
    """Construct the lattice graph for a spec; deterministic site indexing."""
    kind = spec.kind
    if kind not in KINDS:
        raise LatticeError(f"unknown lattice kind {kind!r}; expected one of {KINDS}")
    if kind == "single_box":
        return _build_2d(LatticeSpec("single_box", (2, 2), (False, False),
                                     spec.crossed_parity, spec.coupling_scale))
    if kind in ("checkerboard", "all_crossed"):
        return _build_2d(spec)
    return _build_cubic(spec)


def _check_extent(extent, periodic, kind):
    for ax, (n, per) in enumerate(zip(extent, periodic)):
        if n < 2:
            raise LatticeError(f"extent along axis {ax} must be at least 2, got {n}")
        if per and kind != "all_crossed" and n % 2 != 0:
            raise LatticeError(
                f"{kind} with a periodic axis requires an even extent on that axis "
                f"(axis {ax} has extent {n})")


def _build_2d(spec: LatticeSpec) -> LatticeGraph:
    lx, ly = spec.extent[:2]
    px, py = spec.periodic[:2]
    _check_extent((lx, ly), (px, py), spec.kind)
    coords = tuple((x, y) for y in range(ly) for x in range(lx))
    site_of = lambda x, y: y * lx + x

    xs = range(lx) if px else range(lx - 1)
    ys = range(ly) if py else range(ly - 1)
    boxes = []
    for y in ys:
        for x in xs:
            crossed = spec.kind == "all_crossed" or (x + y + spec.crossed_parity) % 2 == 0
            if spec.kind == "single_box":
                crossed = (x, y) == (0, 0)
            if crossed:
                boxes.append(Box(sites=_plaquette_sites(x, y, lx, ly, px, py, site_of),
                                 pos=(x, y)))
    if not boxes:
        raise LatticeError("lattice has no boxes; enlarge the extent")

    bonds = _collect_bonds(spec, boxes)
    g = LatticeGraph(spec.kind, (lx, ly), (px, py), spec.crossed_parity,
                     spec.coupling_scale, lx * ly, bonds, tuple(boxes), coords)
    validate_graph(g)
    return g


def _build_cubic(spec: LatticeSpec) -> LatticeGraph:
    # Experimental reading of the 3D variant: checkerboard layers whose
    # crossed parity alternates with height, connected by vertical bonds of
    # doubled strength.  Vertical bonds belong to no box.
    if len(spec.extent) != 3:
        raise LatticeError("cubic_variant needs a 3-component extent")
    lx, ly, lz = spec.extent
    px, py, pz = (tuple(spec.periodic) + (False, False, False))[:3]
    _check_extent((lx, ly, lz), (px, py, pz), spec.kind)
    coords = tuple((x, y, z) for z in range(lz) for y in range(ly) for x in range(lx))
    site_of = lambda x, y, z: (z * ly + y) * lx + x

    xs = range(lx) if px else range(lx - 1)
    ys = range(ly) if py else range(ly - 1)
    boxes = []
    for z in range(lz):
        for y in ys:
            for x in xs:
                if (x + y + z + spec.crossed_parity) % 2 == 0:
                    boxes.append(Box(sites=_plaquette_sites(x, y, lx, ly, px, py,
                                                            site_of, z=z),
                                     pos=(x, y, z)))
    bonds = list(_collect_bonds(spec, boxes))
    seen = set()
    zs = range(lz) if pz else range(lz - 1)
    for z in zs:
        for y in range(ly):
            for x in range(lx):
                a, b = site_of(x, y, z), site_of(x, y, (z + 1) % lz)
                key = (min(a, b), max(a, b))
                if key not in seen:
                    seen.add(key)
                    bonds.append(Bond(key[0], key[1], 2.0 * spec.coupling_scale, None))
    g = LatticeGraph(spec.kind, (lx, ly, lz), (px, py, pz), spec.crossed_parity,
                     spec.coupling_scale, lx * ly * lz, tuple(bonds), tuple(boxes), coords)
    validate_graph(g)
    return g


def _collect_bonds(spec: LatticeSpec, boxes):
    scale = spec.coupling_scale
    if spec.kind == "all_crossed":
        # shared plaquette edges merge into a single bond of doubled coupling
        mult = Counter()
        first_box = {}
        for b, box in enumerate(boxes):
            for i, j in _box_pairs(box.sites):
                key = (min(i, j), max(i, j))
                mult[key] += 1
                first_box.setdefault(key, b)
        return tuple(Bond(i, j, scale * m, first_box[(i, j)] if m == 1 else None)
                     for (i, j), m in sorted(mult.items()))
    bonds = []
    for b, box in enumerate(boxes):
        for i, j in _box_pairs(box.sites):
            bonds.append(Bond(min(i, j), max(i, j), scale, b))
    return tuple(bonds)


def validate_graph(g: LatticeGraph):
    for bond in g.bonds:
        if bond.i == bond.j:
            raise LatticeError(f"degenerate bond at site {bond.i}")
        if not (0 <= bond.i < g.n_sites and 0 <= bond.j < g.n_sites):
            raise LatticeError("bond site out of range")
    if g.kind in ("single_box", "checkerboard"):
        per_box = Counter(b.box for b in g.bonds)
        for b, box in enumerate(g.boxes):
            if per_box[b] != 6:
                raise LatticeError(f"box {b} has {per_box[b]} internal bonds, expected 6")
        tagged = [(b.box, b.i, b.j) for b in g.bonds]
        if len(tagged) != len(set(tagged)):
            raise LatticeError("duplicate bond entry within a box")
    if g.kind == "checkerboard" and all(g.periodic):
        if not g.every_site_in_two_boxes():
            raise LatticeError("periodic checkerboard must have every site in 2 boxes")
        if g.n_sites != 2 * g.n_boxes:
            raise LatticeError("site count must equal twice the box count")


# ---------------------------------------------------------------------------
# reflection cuts


def _bond_multiset(bonds):
    return Counter((min(b.i, b.j), max(b.i, b.j), round(b.coupling, 9)) for b in bonds)


def _try_cut(g: LatticeGraph, axis: int, c: int):
    length = g.extent[axis]
    per = g.periodic[axis]
    ndim = len(g.extent)

    def mirror_coord(v):
        w = 2 * c + 1 - v
        return w % length if per else w

    if per:
        left_vals = {(c + 1 + t) % length for t in range(length // 2)}
        lines = (c + 0.5, (c + length // 2) % length + 0.5)
    else:
        if c != length // 2 - 1:
            return None
        left_vals = set(range(c + 1))
        lines = (c + 0.5,)

    mirror = {}
    for s, coord in enumerate(g.coords):
        m = list(coord)
        m[axis] = mirror_coord(coord[axis])
        if not (0 <= m[axis] < length):
            return None
        mirror[s] = g.site_index(m)
    if any(mirror[mirror[s]] != s for s in range(g.n_sites)):
        return None

    left_sites = tuple(s for s in range(g.n_sites) if g.coords[s][axis] in left_vals)
    right_set = set(range(g.n_sites)) - set(left_sites)
    if len(left_sites) != len(right_set):
        return None
    if any(mirror[s] not in right_set for s in left_sites):
        return None
    right_sites = tuple(mirror[s] for s in left_sites)

    # the mirror must map the bond multiset onto itself with equal couplings
    mirrored = [Bond(mirror[b.i], mirror[b.j], b.coupling, None) for b in g.bonds]
    if _bond_multiset(mirrored) != _bond_multiset(g.bonds):
        return None

    left = set(left_sites)
    cut_boxes = []
    for b, box in enumerate(g.boxes):
        inside = [s for s in box.sites if s in left]
        if len(inside) == 4 or len(inside) == 0:
            continue
        if len(inside) != 2:
            return None
        left_pair = tuple(sorted(inside))
        right_pair = tuple(mirror[s] for s in left_pair)
        if any(p in left for p in right_pair):
            return None
        cut_boxes.append(CutBox(box=b, left_pair=left_pair, right_pair=right_pair))
    if not cut_boxes:
        return None

    # every bond is one-sided or an internal bond of a bisected box
    cut_site_sets = [set(g.boxes[cb.box].sites) for cb in cut_boxes]
    for bond in g.bonds:
        i_left, j_left = bond.i in left, bond.j in left
        if i_left == j_left:
            continue
        if not any(bond.i in ss and bond.j in ss for ss in cut_site_sets):
            return None

    assert ndim in (2, 3)
    return ReflectionCut(axis=axis, position=c, lines=lines,
                         left_sites=left_sites, right_sites=right_sites,
                         mirror=mirror, cut_boxes=tuple(cut_boxes))


def find_reflection_cuts(g: LatticeGraph):
    """All valid axis-perpendicular reflection cuts, construction-verified.

    Cuts run between lattice columns/rows, never through sites.  On an axis
    with periodic boundaries a single reflection has two cutting lines and
    every box bisected by either line is listed.  Axes of odd extent admit no
    cut; an empty list is a result, not an error.
    """
    cuts = []
    for axis in range(len(g.extent)):
        length = g.extent[axis]
        if length % 2 != 0:
            continue
        candidates = range(length // 2) if g.periodic[axis] else [length // 2 - 1]
        for c in candidates:
            cut = _try_cut(g, axis, c)
            if cut is not None:
                cuts.append(cut)
    return cuts


PRESETS = {
    "single-box": LatticeSpec("single_box"),
    "checkerboard-4x2": LatticeSpec("checkerboard", (4, 2), (True, True)),
    "checkerboard-4x4": LatticeSpec("checkerboard", (4, 4), (True, True)),
}
