"""Resonator networks: root graphs, line graphs, unit cells and chains.

A resonator site is a CPW segment with two ends (``end`` label 0 and 1).
Ends meet at couplers (2- or 3-way capacitors).  The end label decides the
sign of the antisymmetric (half-wave) mode function at that end, so the
geometry stored here fixes every hopping sign downstream.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegreeTooHigh, EmptyGraph, InvalidCell

__all__ = [
    "RootGraph",
    "Member",
    "Coupler",
    "EndRecord",
    "ResonatorSite",
    "UnitCellSpec",
    "LatticeGraph",
    "Diagnostic",
    "line_graph",
    "line_graph_cell",
    "build_chain",
    "paper_lattice",
    "validate",
    "load_cell",
    "BUNDLED_CELL_ROOT",
]

CELL_SCHEMA_VERSION = 1
MAX_COUPLER_MEMBERS = 3
BOUNDARIES = ("periodic", "hardwall")

# Root graph of one cell of the bundled chain: a rhombus L-T-R-B with the
# T-B rung, plus the R->L link into the next cell (3-regular overall).
BUNDLED_CELL_ROOT = {
    "vertices": ["L", "T", "B", "R"],
    "edges": [
        ["L", "T", 0],
        ["L", "B", 0],
        ["T", "B", 0],
        ["T", "R", 0],
        ["B", "R", 0],
        ["R", "L", 1],
    ],
}


def _vkey(v):
    return (type(v).__name__, v)


@dataclass(frozen=True)
class RootGraph:
    """Undirected multigraph; parallel edges allowed, self-loops rejected."""

    vertices: tuple
    edges: tuple

    def __init__(self, vertices: Iterable[Hashable], edges: Iterable[Sequence]):
        verts = tuple(vertices)
        es = tuple((e[0], e[1]) for e in edges)
        known = set(verts)
        if len(known) != len(verts):
            raise ConfigError("duplicate vertex ids in root graph")
        for u, v in es:
            if u not in known or v not in known:
                raise ConfigError(f"edge ({u!r}, {v!r}) references an unknown vertex")
            if u == v:
                raise ConfigError(f"self-loop at vertex {u!r}")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", es)

    def degree(self, v) -> int:
        return sum((a == v) + (b == v) for a, b in self.edges)

    def degrees(self) -> dict:
        deg = Counter()
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return {v: deg[v] for v in self.vertices}


@dataclass(frozen=True, order=True)
class Member:
    """One resonator end taking part in a coupler."""

    site: int
    end: int
    cell_offset: int = 0


@dataclass(frozen=True)
class Coupler:
    id: int
    members: tuple[Member, ...]

    @property
    def is_inter_cell(self) -> bool:
        return any(m.cell_offset != 0 for m in self.members)


@dataclass(frozen=True)
class EndRecord:
    label: int
    coupler: int | None  # None: boundary-terminated

    @property
    def terminated(self) -> bool:
        return self.coupler is None


@dataclass(frozen=True)
class ResonatorSite:
    id: int
    ends: tuple[EndRecord, ...]


@dataclass(frozen=True)
class UnitCellSpec:
    """Couplers of one cell; members with ``cell_offset=1`` live in the next cell."""

    sites_per_cell: int
    couplers: tuple[Coupler, ...]
    tags: dict = field(default_factory=dict, compare=False, hash=False)
    name: str = "custom"

    @property
    def intra_cell_couplers(self) -> tuple[Coupler, ...]:
        return tuple(c for c in self.couplers if not c.is_inter_cell)

    @property
    def inter_cell_couplers(self) -> tuple[Coupler, ...]:
        return tuple(c for c in self.couplers if c.is_inter_cell)

    @property
    def symmetry_tags(self) -> tuple | None:
        tags = self.tags.get("symmetry")
        return tuple(tags) if tags is not None else None

    def problems(self) -> list[str]:
        out = []
        if self.sites_per_cell < 1:
            out.append("sites_per_cell must be >= 1")
        used = Counter()
        for c in self.couplers:
            if not 2 <= len(c.members) <= MAX_COUPLER_MEMBERS:
                out.append(f"coupler {c.id} has {len(c.members)} members (allowed 2..3)")
            seen = set()
            for m in c.members:
                if not 0 <= m.site < self.sites_per_cell:
                    out.append(f"coupler {c.id} references site {m.site} outside the cell")
                if m.end not in (0, 1):
                    out.append(f"coupler {c.id} uses end label {m.end}")
                if m.cell_offset not in (0, 1):
                    out.append(f"coupler {c.id} uses cell offset {m.cell_offset} (allowed 0, +1)")
                if (m.site, m.cell_offset) in seen:
                    out.append(f"coupler {c.id} lists site {m.site} twice")
                seen.add((m.site, m.cell_offset))
                used[(m.site, m.end)] += 1
            if c.members and min(m.cell_offset for m in c.members) != 0:
                out.append(f"coupler {c.id} has no member in the home cell")
        for (s, e), n in sorted(used.items()):
            if n > 1:
                out.append(f"end {e} of site {s} sits on {n} couplers")
        tags = self.symmetry_tags
        if tags is not None and len(tags) != self.sites_per_cell:
            out.append("symmetry tags must list one entry per site")
        return out

    def check(self) -> "UnitCellSpec":
        problems = self.problems()
        if problems:
            raise InvalidCell("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {
            "version": CELL_SCHEMA_VERSION,
            "name": self.name,
            "sites_per_cell": self.sites_per_cell,
            "couplers": [
                {
                    "members": [
                        {"site": m.site, "end": m.end, "cell_offset": m.cell_offset}
                        for m in c.members
                    ]
                }
                for c in self.couplers
            ],
            "tags": self.tags,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UnitCellSpec":
        allowed = {"version", "name", "sites_per_cell", "couplers", "tags", "root"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in unit-cell JSON: {sorted(unknown)}")
        version = data.get("version", CELL_SCHEMA_VERSION)
        if version != CELL_SCHEMA_VERSION:
            raise ConfigError(f"unsupported unit-cell schema version {version}")
        try:
            couplers = tuple(
                Coupler(
                    i,
                    tuple(
                        Member(int(m["site"]), int(m["end"]), int(m.get("cell_offset", 0)))
                        for m in c["members"]
                    ),
                )
                for i, c in enumerate(data["couplers"])
            )
            spc = int(data["sites_per_cell"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed unit-cell JSON: {exc}") from exc
        return cls(spc, couplers, dict(data.get("tags", {})), data.get("name", "custom"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class LatticeGraph:
    """A finite resonator network (a hard-wall chain or a periodic ring of cells)."""

    sites: tuple[ResonatorSite, ...]
    couplers: tuple[Coupler, ...]
    cell_index: tuple[int, ...]
    boundary: str = "hardwall"
    symmetry_tags: tuple | None = None

    @classmethod
    def from_couplers(cls, n_sites, couplers, cell_index=None, boundary="hardwall",
                      symmetry_tags=None) -> "LatticeGraph":
        """Derive consistent end records from coupler membership."""
        owner: dict[tuple[int, int], int] = {}
        for c in couplers:
            for m in c.members:
                owner.setdefault((m.site, m.end), c.id)
        sites = tuple(
            ResonatorSite(s, (EndRecord(0, owner.get((s, 0))), EndRecord(1, owner.get((s, 1)))))
            for s in range(n_sites)
        )
        if cell_index is None:
            cell_index = (0,) * n_sites
        return cls(sites, tuple(couplers), tuple(cell_index), boundary,
                   None if symmetry_tags is None else tuple(symmetry_tags))

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_cells(self) -> int:
        return max(self.cell_index) + 1 if self.cell_index else 0

    def sites_in_cell(self, cell: int) -> list[int]:
        return [s for s, c in enumerate(self.cell_index) if c == cell]

    def neighbors(self, site: int) -> set[int]:
        out = set()
        for c in self.couplers:
            ids = [m.site for m in c.members]
            if site in ids:
                out.update(i for i in ids if i != site)
        return out

    def adjacency(self) -> np.ndarray:
        """Number of shared couplers between each pair of sites."""
        a = np.zeros((self.n_sites, self.n_sites), dtype=int)
        for c in self.couplers:
            for m in c.members:
                for n in c.members:
                    if m.site != n.site:
                        a[m.site, n.site] += 1
        return a

    def is_connected(self) -> bool:
        if not self.sites:
            return True
        a = self.adjacency() > 0
        seen = {0}
        todo = [0]
        while todo:
            s = todo.pop()
            for n in np.flatnonzero(a[s]):
                if n not in seen:
                    seen.add(int(n))
                    todo.append(int(n))
        return len(seen) == self.n_sites


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def line_graph(root: RootGraph) -> LatticeGraph:
    """Line graph of ``root``: one resonator per root edge, one coupler per root vertex.

    End label 0 of each resonator sits at the smaller of its two root endpoints.
    Vertices of degree 1 leave a terminated end.
    """
    if not root.edges:
        raise EmptyGraph("root graph has no edges")
    deg = root.degrees()
    too_high = [v for v, d in deg.items() if d > MAX_COUPLER_MEMBERS]
    if too_high:
        raise DegreeTooHigh(f"root vertices {too_high!r} have degree > {MAX_COUPLER_MEMBERS}")
    incident = defaultdict(list)
    for i, (u, v) in enumerate(root.edges):
        lo, hi = sorted((u, v), key=_vkey)
        incident[lo].append(Member(i, 0))
        incident[hi].append(Member(i, 1))
    couplers = []
    for v in root.vertices:
        if deg[v] >= 2:
            couplers.append(Coupler(len(couplers), tuple(incident[v])))
    return LatticeGraph.from_couplers(len(root.edges), couplers)


def line_graph_cell(vertices: Sequence, edges: Sequence[Sequence], tags=None,
                    name="custom") -> UnitCellSpec:
    """Line graph of a periodic root cell.

    ``edges`` are ``(u, v, offset)`` triples: ``u`` lives in cell n, ``v`` in
    cell n + offset (offset 0 or 1).  One coupler per root vertex; a coupler
    gathering ends from the previous cell is re-homed there so that every
    member offset is 0 or +1.
    """
    verts = list(vertices)
    if not edges:
        raise EmptyGraph("root cell has no edges")
    incident = defaultdict(list)
    for i, e in enumerate(edges):
        u, v, off = e[0], e[1], int(e[2]) if len(e) > 2 else 0
        if off not in (0, 1):
            raise InvalidCell(f"edge {i} has offset {off}; only 0 and +1 are supported")
        if u == v and off == 0:
            raise ConfigError(f"self-loop at vertex {u!r}")
        lo, hi = sorted((u, v), key=_vkey)
        end_u, end_v = (0, 1) if lo == u else (1, 0)
        incident[u].append((i, end_u, 0))
        incident[v].append((i, end_v, -off))
    couplers = []
    for v in verts:
        ends = incident[v]
        if len(ends) > MAX_COUPLER_MEMBERS:
            raise DegreeTooHigh(f"root vertex {v!r} has degree {len(ends)}")
        if len(ends) < 2:
            continue
        shift = -min(o for _, _, o in ends)
        members = tuple(sorted(Member(s, e, o + shift) for s, e, o in ends))
        couplers.append(Coupler(len(couplers), members))
    return UnitCellSpec(len(edges), tuple(couplers), dict(tags or {}), name).check()


def build_chain(cell: UnitCellSpec, n_cells: int, boundary: str = "hardwall") -> LatticeGraph:
    """Repeat ``cell`` ``n_cells`` times.

    Under ``periodic`` the +1-offset couplers of the last cell wrap to cell 0.
    Under ``hardwall`` they are dropped and their ends left terminated.
    """
    problems = cell.problems()
    if problems:
        raise InvalidCell("; ".join(problems))
    if n_cells < 1:
        raise InvalidCell("n_cells must be >= 1")
    if boundary not in BOUNDARIES:
        raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    spc = cell.sites_per_cell
    couplers = []
    for c in range(n_cells):
        for cp in cell.couplers:
            members = []
            for m in cp.members:
                target = c + m.cell_offset
                if target >= n_cells:
                    if boundary == "hardwall":
                        break
                    target %= n_cells
                members.append(Member(target * spc + m.site, m.end))
            else:
                couplers.append(Coupler(len(couplers), tuple(members)))
    cell_index = [c for c in range(n_cells) for _ in range(spc)]
    tags = cell.symmetry_tags
    return LatticeGraph.from_couplers(
        n_cells * spc, couplers, cell_index, boundary,
        None if tags is None else tags * n_cells,
    )


def load_cell(path) -> UnitCellSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"lattice file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"lattice file {path} is not valid JSON: {exc}") from exc
    return UnitCellSpec.from_dict(data).check()


def paper_lattice() -> UnitCellSpec:
    """The bundled 6-resonator rhombus-chain cell (versioned JSON asset)."""
    text = resources.files("cpwlattice").joinpath("data/rhombus_cell.json").read_text("utf-8")
    return UnitCellSpec.from_dict(json.loads(text)).check()


def validate(lat: LatticeGraph) -> list[Diagnostic]:
    """Invariant violations of ``lat``; an empty list means valid."""
    out: list[Diagnostic] = []
    n = lat.n_sites
    owners = defaultdict(list)
    for c in lat.couplers:
        ids = [m.site for m in c.members]
        if len(ids) > MAX_COUPLER_MEMBERS:
            out.append(Diagnostic("DegreeTooHigh", f"coupler {c.id} has {len(ids)} members"))
        elif len(ids) < 2:
            out.append(Diagnostic("TooFewMembers", f"coupler {c.id} has {len(ids)} member(s)"))
        for s, k in Counter(ids).items():
            if k > 1:
                out.append(Diagnostic("DuplicateMember", f"site {s} appears {k} times in coupler {c.id}"))
        for m in c.members:
            if not 0 <= m.site < n:
                out.append(Diagnostic("UnknownSite", f"coupler {c.id} references site {m.site}"))
            elif m.end not in (0, 1):
                out.append(Diagnostic("BadEndLabel", f"coupler {c.id} uses end {m.end} of site {m.site}"))
            owners[(m.site, m.end)].append(c.id)
        if lat.boundary == "hardwall" and lat.n_cells > 2:
            cells = [lat.cell_index[m.site] for m in c.members if 0 <= m.site < n]
            if cells and max(cells) - min(cells) > 1:
                out.append(Diagnostic("WrapAround", f"coupler {c.id} spans cells {min(cells)}..{max(cells)} under hardwall"))
    for (s, e), cids in sorted(owners.items()):
        if len(cids) > 1:
            out.append(Diagnostic("EndConflict", f"end {e} of site {s} is on couplers {cids}"))
    if len(lat.cell_index) != n:
        out.append(Diagnostic("CellIndexMismatch", "cell_index length differs from site count"))
    for site in lat.sites:
        if len(site.ends) != 2:
            out.append(Diagnostic("BadEndCount", f"site {site.id} has {len(site.ends)} ends"))
            continue
        for rec in site.ends:
            expected = owners.get((site.id, rec.label), [None])[0]
            if rec.coupler != expected:
                out.append(Diagnostic(
                    "EndRecordMismatch",
                    f"site {site.id} end {rec.label} records coupler {rec.coupler}, membership says {expected}",
                ))
    return out
