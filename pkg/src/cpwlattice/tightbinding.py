"""Photonic tight-binding models for one resonator harmonic.

Conventions: frequencies in GHz.  The Hamiltonian is

    H = sum_n omega_mu a_n^+ a_n - sum_<n,n'> t_nn' a_n^+ a_n'

with ``t_nn' = s_n s_n' t0`` and ``t0 < 0``; ``s`` is the sign of the mode
function at the coupled end (+1 for the symmetric family, +1/-1 at end 0/1
for the antisymmetric family).  Normal-mode frequencies are corrected to
first order for the frequency dependence of the hopping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    InvalidCell,
    InvalidLattice,
    NoConvergence,
    NonPositiveInput,
    NumericError,
    Underdetermined,
    ZeroHopping,
)
from .lattice import LatticeGraph, UnitCellSpec, validate

__all__ = [
    "ModeFamily",
    "Hamiltonian",
    "BandResult",
    "DosHistogram",
    "Eigensystem",
    "EdgeFit",
    "hopping_from_circuit",
    "end_sign",
    "assemble_hamiltonian",
    "bloch_hamiltonian",
    "bloch_bands",
    "finite_spectrum",
    "frequency_correction",
    "density_of_states",
    "band_groups",
    "epsilon_groups",
    "fit_band_edges",
    "default_k_grid",
    "outer_cell_weight",
]

DEFAULT_K_POINTS = 256
FIT_K_POINTS = 512
FLAT_TOL = 1e-9
_GROUP_TOL = 1e-7  # in units of |t0|


@dataclass(frozen=True)
class ModeFamily:
    """Harmonic ``mu`` of every resonator: on-site frequency and bare hopping (GHz)."""

    mu: int
    omega_mu: float
    t0: float

    def __post_init__(self):
        if self.mu < 1:
            raise NumericError(f"harmonic index must be >= 1, got {self.mu}")
        if self.omega_mu <= 0:
            raise NonPositiveInput("omega_mu must be positive")
        if abs(self.t0) >= self.omega_mu:
            raise NumericError("|t0| must be smaller than omega_mu")

    @property
    def parity(self) -> str:
        return "symmetric" if self.mu % 2 == 0 else "antisymmetric"

    @classmethod
    def for_parity(cls, parity: str, omega_mu: float, t0: float) -> "ModeFamily":
        return cls(_mu_for_parity(parity), omega_mu, t0)


def _mu_for_parity(parity: str) -> int:
    if parity == "symmetric":
        return 2
    if parity == "antisymmetric":
        return 1
    raise NumericError(f"parity must be 'symmetric' or 'antisymmetric', got {parity!r}")


def end_sign(parity: str, end: int) -> int:
    if parity == "symmetric":
        return 1
    return 1 if end == 0 else -1


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray
    site_index: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Eigensystem:
    """Normal modes of a finite network; ``vectors[:, i]`` is mode ``i``."""

    frequencies: np.ndarray
    uncorrected: np.ndarray
    epsilon: np.ndarray
    vectors: np.ndarray
    family: ModeFamily
    corrected: bool

    def __len__(self) -> int:
        return len(self.frequencies)

    def to_rows(self):
        header = ["mode_index", "freq_uncorrected_GHz", "freq_corrected_GHz", "epsilon"]
        corr = frequency_correction(self.uncorrected, self.family)
        rows = [
            [i, float(u), float(c), float(e)]
            for i, (u, c, e) in enumerate(zip(self.uncorrected, corr, self.epsilon))
        ]
        return header, rows


@dataclass(frozen=True)
class BandResult:
    """Bloch spectrum on a k grid.  Arrays are indexed ``[k, band]``."""

    k_grid: np.ndarray
    uncorrected: np.ndarray
    corrected: np.ndarray
    epsilon: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    family: ModeFamily

    @property
    def n_bands(self) -> int:
        return self.uncorrected.shape[1]

    def bands(self, corrected: bool = True) -> np.ndarray:
        return self.corrected if corrected else self.uncorrected

    def to_rows(self):
        header = ["k", "band_index", "freq_uncorrected_GHz", "freq_corrected_GHz"]
        rows = []
        for i, k in enumerate(self.k_grid):
            for b in range(self.n_bands):
                rows.append([float(k), b, float(self.uncorrected[i, b]), float(self.corrected[i, b])])
        return header, rows


@dataclass(frozen=True)
class DosHistogram:
    """Density of states in states per cell per GHz."""

    edges: np.ndarray
    counts: np.ndarray
    total_states: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def integral(self) -> float:
        return float(np.sum(self.counts * np.diff(self.edges)))

    def support(self) -> list[tuple[float, float]]:
        """Frequency intervals covered by non-empty bins (adjacent bins merged)."""
        out = []
        nz = self.counts > 0
        i = 0
        while i < len(nz):
            if nz[i]:
                j = i
                while j + 1 < len(nz) and nz[j + 1]:
                    j += 1
                out.append((float(self.edges[i]), float(self.edges[j + 1])))
                i = j + 1
            else:
                i += 1
        return out

    def to_rows(self):
        return ["bin_center_GHz", "dos"], [[float(c), float(d)] for c, d in zip(self.centers, self.counts)]


def hopping_from_circuit(f1: float, mu: int, Cc: float, Z0: float) -> float:
    """Bare hopping t_mu/2pi in GHz from the fundamental frequency f1 (GHz),
    coupling capacitance Cc (fF) and line impedance Z0 (ohm).

    ``t_mu = -(1/pi) w1 w_mu Cc Z0`` with ``w_mu = mu w1``; in ordinary
    frequency this is ``-2 f1 (mu f1) Cc Z0``.
    """
    if f1 <= 0 or mu < 1 or Z0 <= 0 or Cc < 0:
        raise NonPositiveInput("f1, mu and Z0 must be positive and Cc non-negative")
    f1_hz = f1 * 1e9
    t_hz = -2.0 * f1_hz * (mu * f1_hz) * (Cc * 1e-15) * Z0
    return t_hz / 1e9


def _pair_terms(couplers, parity):
    for c in couplers:
        for a in c.members:
            sa = end_sign(parity, a.end)
            for b in c.members:
                if a is b:
                    continue
                yield a, b, sa * end_sign(parity, b.end)


def assemble_hamiltonian(lat: LatticeGraph, fam: ModeFamily) -> Hamiltonian:
    """Dense real-symmetric Hamiltonian of a finite network."""
    problems = validate(lat)
    if problems:
        raise InvalidLattice("; ".join(str(p) for p in problems))
    n = lat.n_sites
    h = np.zeros((n, n))
    for a, b, ss in _pair_terms(lat.couplers, fam.parity):
        h[a.site, b.site] += -ss * fam.t0
    h[np.diag_indices(n)] = fam.omega_mu
    return Hamiltonian(h, tuple(range(n)))


def bloch_hamiltonian(cell: UnitCellSpec, fam: ModeFamily, k) -> np.ndarray:
    """H(k) for a scalar or an array of momenta; returns ``(..., n, n)``."""
    k = np.asarray(k, dtype=float)
    n = cell.sites_per_cell
    h = np.zeros(k.shape + (n, n), dtype=complex)
    for a, b, ss in _pair_terms(cell.couplers, fam.parity):
        if a.site == b.site and a.cell_offset == b.cell_offset:
            continue
        h[..., a.site, b.site] += -ss * fam.t0 * np.exp(1j * k * (b.cell_offset - a.cell_offset))
    idx = np.arange(n)
    h[..., idx, idx] += fam.omega_mu
    return h


def default_k_grid(n: int = DEFAULT_K_POINTS) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def _fix_phase(vecs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Make the first non-negligible component of each column real and positive."""
    vecs = np.array(vecs, copy=True)
    mags = np.abs(vecs)
    first = np.argmax(mags > tol, axis=-2)
    picked = np.take_along_axis(vecs, first[..., None, :], axis=-2)[..., 0, :]
    phase = picked / np.abs(picked)
    if np.isrealobj(vecs):
        phase = np.sign(picked)
    return vecs / phase[..., None, :]


def frequency_correction(eigenvalue, fam: ModeFamily):
    """First-order frequency-dependent hopping correction.

    With ``eps = (w0 - omega)/t0`` the corrected frequency is
    ``omega + eps t0 + (eps t0)^2 / omega``.  Works elementwise on arrays.
    """
    w = np.asarray(eigenvalue, dtype=float)
    shift = w - fam.omega_mu
    if np.any(np.abs(shift) >= fam.omega_mu):
        raise NumericError("eigenvalue lies outside the perturbative range |w - omega_mu| < omega_mu")
    if fam.t0 == 0:
        if np.any(shift != 0):
            raise ZeroHopping("t0 = 0 but the eigenvalue differs from omega_mu")
        return w + 0.0 if w.ndim else float(w)
    eps = shift / fam.t0
    out = fam.omega_mu + eps * fam.t0 + (eps * fam.t0) ** 2 / fam.omega_mu
    return out if out.ndim else float(out)


def _epsilon(w, fam: ModeFamily):
    if fam.t0 == 0:
        return np.zeros_like(np.asarray(w, dtype=float))
    return (np.asarray(w, dtype=float) - fam.omega_mu) / fam.t0


def bloch_bands(cell: UnitCellSpec, fam: ModeFamily, k_grid=None) -> BandResult:
    """Diagonalize H(k) on a momentum grid (default: 256 points in [-pi, pi))."""
    problems = cell.problems()
    if problems:
        raise InvalidCell("; ".join(problems))
    k = default_k_grid() if k_grid is None else np.sort(np.asarray(k_grid, dtype=float))
    if k.size and (k.min() < -np.pi or k.max() >= np.pi):
        raise NumericError("k values must lie in [-pi, pi)")
    hk = bloch_hamiltonian(cell, fam, k)
    assert np.array_equal(hk, np.conj(np.swapaxes(hk, -1, -2))), "H(k) not Hermitian"
    w, v = np.linalg.eigh(hk)
    v = _fix_phase(v)
    return BandResult(k, w, frequency_correction(w, fam), _epsilon(w, fam), v, fam)


def finite_spectrum(lat: LatticeGraph, fam: ModeFamily, corrected: bool = True) -> Eigensystem:
    """Normal modes of a finite network, sorted by frequency."""
    h = assemble_hamiltonian(lat, fam).matrix
    w, v = np.linalg.eigh(h)
    v = _fix_phase(v)
    freqs = frequency_correction(w, fam) if corrected else w.copy()
    return Eigensystem(np.asarray(freqs), w, _epsilon(w, fam), v, fam, corrected)


def density_of_states(bands: BandResult, bin_width: float, corrected: bool = True) -> DosHistogram:
    """Histogram of band frequencies over the k grid, normalized per cell.

    Bins are aligned to integer multiples of ``bin_width``.
    """
    if bin_width <= 0:
        raise NonPositiveInput("bin_width must be positive")
    vals = bands.bands(corrected).ravel()
    lo = math.floor(vals.min() / bin_width)
    hi = math.floor(vals.max() / bin_width) + 1
    edges = np.arange(lo, hi + 1) * bin_width
    counts, _ = np.histogram(vals, bins=edges)
    nk = bands.uncorrected.shape[0]
    dos = counts / nk / bin_width
    return DosHistogram(edges, dos, float(counts.sum()) / nk)


def _merge_intervals(intervals, tol):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


def band_groups(bands: BandResult, corrected: bool = True, tol: float = 1e-9) -> list[tuple[float, float]]:
    """Frequency intervals of touching/overlapping bands, ascending; gaps lie between them."""
    b = bands.bands(corrected)
    return _merge_intervals(zip(b.min(axis=0), b.max(axis=0)), tol)


def epsilon_groups(cell: UnitCellSpec, parity: str, n_k: int = FIT_K_POINTS) -> list[tuple[float, float]]:
    """Band groups in units of the hopping, as ``(eps_at_bottom, eps_at_top)``.

    ``eps`` is independent of omega_mu and of |t0|, so the model band edges
    for any parameters follow in closed form from these values.
    """
    fam = ModeFamily(_mu_for_parity(parity), 1.0, -1e-3)
    res = bloch_bands(cell, fam, default_k_grid(n_k))
    # t0 < 0 so eps = -(w - 1)/1e-3 decreases with frequency
    lam = (res.uncorrected - 1.0) / 1e-3  # = -eps, increasing with frequency
    groups = _merge_intervals(zip(lam.min(axis=0), lam.max(axis=0)), _GROUP_TOL)
    return [(-lo, -hi) for lo, hi in groups]


@dataclass(frozen=True)
class EdgeFit:
    omega_mu: float
    t0: float
    residual: float
    model_edges: dict
    observed: tuple

    @property
    def family_kwargs(self) -> dict:
        return {"omega_mu": self.omega_mu, "t0": self.t0}


def _parse_role(role):
    if isinstance(role, str):
        side, _, idx = role.partition(":")
        role = (side, int(idx))
    side, idx = role
    if side not in ("bottom", "top"):
        raise NumericError(f"edge role must be 'bottom' or 'top', got {side!r}")
    return side, int(idx)


def _model_edge(omega, t0, eps):
    x = eps * t0
    return omega + x + x * x / omega


def fit_band_edges(observed_edges, cell: UnitCellSpec, parity: str, guess=None,
                   n_k: int = FIT_K_POINTS) -> EdgeFit:
    """Least-squares (omega_mu, t0) matching corrected band-group edges.

    ``observed_edges`` holds ``(frequency_GHz, role)`` pairs; ``role`` is
    ``("bottom" | "top", group_index)`` or the string ``"bottom:0"`` etc.,
    with groups counted upward from the lowest band group.
    """
    obs = [(float(f), _parse_role(r)) for f, r in observed_edges]
    if len({f for f, _ in obs}) < 2 or len({r for _, r in obs}) < 2:
        raise Underdetermined("need at least two distinct observed band edges")
    groups = epsilon_groups(cell, parity, n_k)
    eps_of = {}
    for i, (bottom, top) in enumerate(groups):
        eps_of[("bottom", i)] = bottom
        eps_of[("top", i)] = top
    try:
        eps = np.array([eps_of[r] for _, r in obs])
    except KeyError as exc:
        raise NumericError(f"edge role {exc.args[0]} does not exist; model has {len(groups)} band groups") from exc
    target = np.array([f for f, _ in obs])
    if guess is None:
        # linear fit ignoring the quadratic correction
        a = np.column_stack([np.ones_like(eps), eps])
        (w0, t_lin), *_ = np.linalg.lstsq(a, target, rcond=None)
        t_lin = min(t_lin, -1e-6 * abs(w0))
        guess = (w0, t_lin)
    w0, tg = guess
    res = optimize.least_squares(
        lambda p: _model_edge(p[0], p[1], eps) - target,
        x0=[w0, tg],
        bounds=([1e-9, -0.5 * abs(w0) - 1.0], [np.inf, 0.0]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    if not res.success:
        raise NoConvergence("band-edge fit did not converge",
                            {"status": res.status, "message": res.message, "x": res.x.tolist()})
    omega, t0 = (float(x) for x in res.x)
    model = {f"{s}:{i}": float(_model_edge(omega, t0, eps_of[(s, i)])) for (s, i) in eps_of}
    return EdgeFit(omega, t0, float(np.sqrt(np.mean(res.fun ** 2))), model, tuple(observed_edges))


def outer_cell_weight(vector, lat: LatticeGraph, n_edge_cells: int = 1) -> float:
    """Probability weight of a site-indexed mode on the first and last cells."""
    wt = np.abs(np.asarray(vector)) ** 2
    cells = np.asarray(lat.cell_index)
    last = lat.n_cells - 1
    mask = (cells < n_edge_cells) | (cells > last - n_edge_cells)
    return float(wt[mask].sum() / wt.sum())
