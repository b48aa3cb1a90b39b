"""Display artifacts: synthetic transmission, flux maps, and file export.

Transmission is a coupled-mode Lorentzian sum.  Mode ``k`` couples to the
ports with rates ``kappa_in = base * psi_k(in)^2`` and
``kappa_out = base * psi_k(out)^2``; its total linewidth is
``kappa0 + kappa_in + kappa_out`` and its complex response is

    A_k(f) = base * psi_k(in) * psi_k(out) / (i (f - f_k) + kappa_k / 2)

All exports are byte-stable for fixed input: floats are written with
``repr`` (shortest round-trip form) in CSV/JSON and fixed precision in SVG.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DimensionMismatch, NonPositiveInput

__all__ = [
    "PortCoupling",
    "TransmissionTrace",
    "FluxMap",
    "Table",
    "synth_transmission",
    "flux_map",
    "as_table",
    "export",
    "load_table",
    "colormap",
    "FORMATS",
]

FORMATS = ("csv", "json", "svg")
DEFAULT_KAPPA0 = 0.001
DEFAULT_BASE_RATE = 0.002
SVG_WIDTH = 640
SVG_HEIGHT = 420


@dataclass(frozen=True)
class PortCoupling:
    """Input/output port sites, external base rate and intrinsic linewidth (GHz)."""

    input_site: int
    output_site: int
    base_rate: float = DEFAULT_BASE_RATE
    kappa0: float = DEFAULT_KAPPA0

    def __post_init__(self):
        if self.base_rate < 0 or self.kappa0 < 0:
            raise NonPositiveInput("port rates must be non-negative")

    def rates(self, eigenvectors):
        v = np.asarray(eigenvectors)
        n = v.shape[0]
        if not (0 <= self.input_site < n and 0 <= self.output_site < n):
            raise DimensionMismatch(f"port sites outside vector length {n}")
        k_in = self.base_rate * np.abs(v[self.input_site]) ** 2
        k_out = self.base_rate * np.abs(v[self.output_site]) ** 2
        return k_in, k_out, self.kappa0 + k_in + k_out


@dataclass(frozen=True)
class TransmissionTrace:
    freqs: np.ndarray
    amplitude: np.ndarray

    def __add__(self, other: "TransmissionTrace") -> "TransmissionTrace":
        if not np.array_equal(self.freqs, other.freqs):
            raise DimensionMismatch("traces on different grids")
        return TransmissionTrace(self.freqs, self.amplitude + other.amplitude)

    def to_rows(self):
        header = ["freq_GHz", "re", "im", "abs"]
        rows = [[float(f), float(a.real), float(a.imag), float(abs(a))] for f, a in zip(self.freqs, self.amplitude)]
        return header, rows


@dataclass(frozen=True)
class FluxMap:
    flux: np.ndarray
    freqs: np.ndarray
    amplitude: np.ndarray  # (n_flux, n_freq)

    def to_rows(self):
        header = ["flux", "freq_GHz", "abs"]
        rows = []
        for i, phi in enumerate(self.flux):
            for j, f in enumerate(self.freqs):
                rows.append([float(phi), float(f), float(abs(self.amplitude[i, j]))])
        return header, rows


def synth_transmission(eigenfreqs, eigenvectors, ports: PortCoupling, grid) -> TransmissionTrace:
    """Complex transmission on ``grid`` (GHz) from site-indexed eigenvectors (columns)."""
    f_k = np.asarray(eigenfreqs, dtype=float)
    v = np.asarray(eigenvectors)
    if v.ndim != 2 or v.shape[1] != f_k.size:
        raise DimensionMismatch(f"eigenvectors must have {f_k.size} columns, got shape {v.shape}")
    g = np.asarray(grid, dtype=float)
    _, _, kappa = ports.rates(v)
    num = ports.base_rate * v[ports.input_site] * v[ports.output_site]
    amp = (num[None, :] / (1j * (g[:, None] - f_k[None, :]) + kappa[None, :] / 2)).sum(axis=1)
    return TransmissionTrace(g, amp)


def flux_map(scan, ports: PortCoupling, grid) -> FluxMap:
    """Stack transmission rows over a flux scan.

    ``scan`` is a bound-state scan (anything with ``flux``, ``results`` and
    ``site_amplitudes``) or an iterable of ``(flux, eigenfreqs, site_vectors)``.
    """
    rows, fluxes = [], []
    if hasattr(scan, "site_amplitudes"):
        items = ((phi, res.eigenfrequencies, scan.site_amplitudes(i))
                 for i, (phi, res) in enumerate(zip(scan.flux, scan.results)))
    else:
        items = scan
    for phi, freqs, vecs in items:
        fluxes.append(float(phi))
        rows.append(synth_transmission(freqs, vecs, ports, grid).amplitude)
    return FluxMap(np.asarray(fluxes), np.asarray(grid, dtype=float), np.vstack(rows))


@dataclass(frozen=True)
class Table:
    """Column-oriented artifact, the common form behind every export."""

    kind: str
    header: tuple
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        i = self.header.index(name)
        return np.asarray([r[i] for r in self.rows], dtype=float)


_KINDS = {
    "BandResult": "bands",
    "DosHistogram": "dos",
    "BoundStateScan": "boundstates",
    "CrossingScan": "crossing",
    "TransmissionTrace": "trace",
    "FluxMap": "map",
    "Eigensystem": "finite",
}


def as_table(obj, kind: str | None = None) -> Table:
    if isinstance(obj, Table):
        return obj
    header, rows = obj.to_rows()
    kind = kind or _KINDS.get(type(obj).__name__, type(obj).__name__.lower())
    return Table(kind, tuple(header), tuple(tuple(_plain(x) for x in r) for r in rows))


def _plain(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return 0.0 if x == 0 else x


def _csv_text(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.header)
    for r in t.rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _json_text(t: Table) -> str:
    return json.dumps({"kind": t.kind, "columns": list(t.header), "rows": [list(r) for r in t.rows]},
                      indent=1, allow_nan=False) + "\n"


def load_table(path) -> Table:
    data = json.loads(Path(path).read_text())
    return Table(data["kind"], tuple(data["columns"]), tuple(tuple(_plain(x) for x in r) for r in data["rows"]))


# viridis anchor colors, linearly interpolated to 256 steps
_ANCHORS = [
    (0.0, (68, 1, 84)), (0.25, (59, 82, 139)), (0.5, (33, 145, 140)),
    (0.75, (94, 201, 98)), (1.0, (253, 231, 37)),
]


def colormap(steps: int = 256) -> list[str]:
    xs = np.linspace(0.0, 1.0, steps)
    pos = [a for a, _ in _ANCHORS]
    chans = [np.interp(xs, pos, [c[i] for _, c in _ANCHORS]) for i in range(3)]
    return ["#%02x%02x%02x" % tuple(int(round(ch[k])) for ch in chans) for k in range(steps)]


_CMAP = colormap()
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


class _Canvas:
    left, right, top, bottom = 70, 20, 20, 50

    def __init__(self, xlim, ylim, xlabel, ylabel):
        self.x0, self.x1 = _pad(xlim)
        self.y0, self.y1 = _pad(ylim)
        self.parts = []
        self.xlabel, self.ylabel = xlabel, ylabel

    def sx(self, x):
        w = SVG_WIDTH - self.left - self.right
        return self.left + (x - self.x0) / (self.x1 - self.x0) * w

    def sy(self, y):
        h = SVG_HEIGHT - self.top - self.bottom
        return self.top + (1 - (y - self.y0) / (self.y1 - self.y0)) * h

    def polyline(self, xs, ys, color):
        pts = " ".join(f"{self.sx(x):.2f},{self.sy(y):.2f}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')

    def circle(self, x, y, r, color):
        self.parts.append(f'<circle cx="{self.sx(x):.2f}" cy="{self.sy(y):.2f}" r="{r:.2f}" fill="{color}" fill-opacity="0.7"/>')

    def rect(self, x0, y0, x1, y1, color):
        ax, bx = sorted((self.sx(x0), self.sx(x1)))
        ay, by = sorted((self.sy(y0), self.sy(y1)))
        self.parts.append(f'<rect x="{ax:.2f}" y="{ay:.2f}" width="{bx - ax:.2f}" height="{by - ay:.2f}" fill="{color}"/>')

    def render(self) -> str:
        w, h = SVG_WIDTH, SVG_HEIGHT
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
               f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>']
        out += self.parts
        x_a, x_b, y_a, y_b = self.left, w - self.right, self.top, h - self.bottom
        out.append(f'<rect x="{x_a}" y="{y_a}" width="{x_b - x_a}" height="{y_b - y_a}" fill="none" stroke="black"/>')
        for t in np.linspace(self.x0, self.x1, 5):
            out.append(f'<line x1="{self.sx(t):.2f}" y1="{y_b}" x2="{self.sx(t):.2f}" y2="{y_b + 5}" stroke="black"/>')
            out.append(f'<text x="{self.sx(t):.2f}" y="{y_b + 18}" font-size="11" text-anchor="middle">{t:.4g}</text>')
        for t in np.linspace(self.y0, self.y1, 5):
            out.append(f'<line x1="{x_a - 5}" y1="{self.sy(t):.2f}" x2="{x_a}" y2="{self.sy(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{x_a - 8}" y="{self.sy(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.5g}</text>')
        out.append(f'<text x="{(x_a + x_b) / 2:.1f}" y="{h - 10}" font-size="12" text-anchor="middle">{self.xlabel}</text>')
        out.append(f'<text x="14" y="{(y_a + y_b) / 2:.1f}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 14 {(y_a + y_b) / 2:.1f})">{self.ylabel}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _pad(lim):
    a, b = float(lim[0]), float(lim[1])
    if b - a < 1e-12:
        return a - 0.5e-3 * max(abs(a), 1.0), b + 0.5e-3 * max(abs(b), 1.0)
    return a, b


def _svg_text(t: Table) -> str:
    kind = t.kind
    if kind == "bands":
        k, b, f = t.column("k"), t.column("band_index"), t.column("freq_corrected_GHz")
        c = _Canvas((k.min(), k.max()), (f.min(), f.max()), "k (rad per cell)", "frequency (GHz)")
        for i, band in enumerate(np.unique(b)):
            m = b == band
            c.polyline(k[m], f[m], _PALETTE[i % len(_PALETTE)])
    elif kind == "dos":
        x, y = t.column("bin_center_GHz"), t.column("dos")
        c = _Canvas((x.min(), x.max()), (0.0, y.max()), "frequency (GHz)", "DOS (states / cell / GHz)")
        c.polyline(x, y, _PALETTE[0])
    elif kind == "trace":
        x, y = t.column("freq_GHz"), t.column("abs")
        c = _Canvas((x.min(), x.max()), (0.0, y.max()), "frequency (GHz)", "|transmission|")
        c.polyline(x, y, _PALETTE[0])
    elif kind == "crossing":
        x, b, f = t.column("flux_offset"), t.column("branch_index"), t.column("freq_GHz")
        c = _Canvas((x.min(), x.max()), (f.min(), f.max()), "flux offset (flux quanta)", "frequency (GHz)")
        for i, br in enumerate(np.unique(b)):
            m = b == br
            c.polyline(x[m], f[m], _PALETTE[i % len(_PALETTE)])
    elif kind == "boundstates":
        x, f = t.column("flux"), t.column("eigenfreq_GHz")
        wcols = [h for h in t.header if h.startswith("qubit_weight_")]
        w = np.sum([t.column(h) for h in wcols], axis=0) if wcols else np.zeros_like(f)
        c = _Canvas((x.min(), x.max()), (f.min(), f.max()), "flux (flux quanta)", "frequency (GHz)")
        for xi, fi, wi in zip(x, f, w):
            r = 1.0 + 5.0 * wi
            c.circle(xi, fi, r, _CMAP[int(round(min(max(wi, 0.0), 1.0) * 255))])
    elif kind == "map":
        x, f, a = t.column("flux"), t.column("freq_GHz"), t.column("abs")
        xs, fs = np.unique(x), np.unique(f)
        c = _Canvas((xs.min(), xs.max()), (fs.min(), fs.max()), "flux (flux quanta)", "frequency (GHz)")
        dx = (xs[1] - xs[0]) if xs.size > 1 else 1e-3
        df = (fs[1] - fs[0]) if fs.size > 1 else 1e-3
        top = a.max() if a.max() > 0 else 1.0
        for xi, fi, ai in zip(x, f, a):
            color = _CMAP[int(round(ai / top * 255))]
            c.rect(xi - dx / 2, fi - df / 2, xi + dx / 2, fi + df / 2, color)
    elif kind == "finite":
        f = t.column("freq_corrected_GHz")
        idx = t.column("mode_index")
        c = _Canvas((idx.min(), idx.max()), (f.min(), f.max()), "mode index", "frequency (GHz)")
        for i, fi in zip(idx, f):
            c.circle(i, fi, 2.0, _PALETTE[0])
    else:
        raise DimensionMismatch(f"no SVG rendering for artifact kind {kind!r}")
    return c.render()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def export(obj, fmt: str, path, inputs=None, kind: str | None = None) -> Path:
    """Write ``obj`` as csv, json or svg plus a ``<path>.provenance.json`` sidecar.

    ``inputs`` (any JSON-serializable value, usually the run config) is hashed
    into the sidecar; without it the artifact's own JSON form is hashed.
    """
    if fmt not in FORMATS:
        raise DimensionMismatch(f"format must be one of {FORMATS}, got {fmt!r}")
    t = as_table(obj, kind)
    text = {"csv": _csv_text, "json": _json_text, "svg": _svg_text}[fmt](t)
    path = Path(path)
    if inputs is None:
        digest = _sha256(_json_text(t))
    else:
        digest = _sha256(json.dumps(inputs, sort_keys=True, separators=(",", ":")))
    prov = {"artifact": t.kind, "format": fmt, "input_sha256": digest,
            "output_sha256": _sha256(text), "tool": "cpwlattice", "tool_version": __version__}
    path.parent.mkdir(parents=True, exist_ok=True)
    _write(path, text)
    _write(Path(str(path) + ".provenance.json"), json.dumps(prov, indent=2, sort_keys=True) + "\n")
    return path


def _write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
