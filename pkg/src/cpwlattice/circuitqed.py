"""Flux-tunable transmons coupled to lattice modes, single-excitation sector.

Qubits are treated as two-level systems.  The bordered Hamiltonian has the
(frequency-corrected) lattice normal modes on the diagonal, followed by the
bare qubit frequencies; qubit ``j`` couples to mode ``k`` with strength
``g0_j * psi_k(site_j)``.  Orthonormal mode vectors absorb the 1/N
normalization, so ``g0`` is the coupling to a single isolated resonator.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import constants, optimize

from .errors import (
    DimensionMismatch,
    NonPositiveInput,
    NumericError,
    ResonantMode,
    TransmonApproxInvalid,
    ZeroDetuning,
)
from .lattice import LatticeGraph, UnitCellSpec
from .tightbinding import ModeFamily, band_groups, bloch_bands, finite_spectrum

__all__ = [
    "TransmonSpec",
    "QubitPlacement",
    "SingleExcitationResult",
    "BoundStateScan",
    "CrossingScan",
    "transmon_frequency",
    "transmon_slope",
    "flux_for_frequency",
    "ec_from_capacitance",
    "g_scaled",
    "single_excitation_hamiltonian",
    "diagonalize_single_excitation",
    "bound_states",
    "dispersive_shift",
    "lamb_shifted_frequency",
    "exchange_coupling_perturbative",
    "avoided_crossing_scan",
    "minimum_qubit_gap",
]

MIN_GAP = 1e-6
QUBIT_LIKE_THRESHOLD = 0.5
TRANSMON_RATIO_ADVISORY = 20.0


@dataclass(frozen=True)
class TransmonSpec:
    """SQUID transmon energies in GHz (E/h)."""

    EC: float
    EJ_sum: float
    EJ_diff: float = 0.0

    def __post_init__(self):
        if self.EC <= 0 or self.EJ_sum <= 0:
            raise NonPositiveInput("EC and EJ_sum must be positive")
        if not 0 <= self.EJ_diff <= self.EJ_sum:
            raise NumericError("EJ_diff must satisfy 0 <= EJ_diff <= EJ_sum")
        if self.EJ_sum / self.EC < TRANSMON_RATIO_ADVISORY:
            warnings.warn(
                f"EJ/EC = {self.EJ_sum / self.EC:.1f} is below the transmon regime ({TRANSMON_RATIO_ADVISORY:g})",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def asymmetry(self) -> float:
        return self.EJ_diff / self.EJ_sum

    def ej(self, flux):
        """Effective Josephson energy of the SQUID at ``flux`` (units of the flux quantum)."""
        x = np.pi * np.asarray(flux, dtype=float)
        d = self.asymmetry
        return self.EJ_sum * np.sqrt(np.cos(x) ** 2 + d * d * np.sin(x) ** 2)


@dataclass(frozen=True)
class QubitPlacement:
    qubit_id: int | str
    site: int
    g0: float

    def __post_init__(self):
        if self.g0 < 0:
            raise NonPositiveInput("g0 must be non-negative")
        if self.site < 0:
            raise DimensionMismatch("site index must be non-negative")


@dataclass(frozen=True)
class SingleExcitationResult:
    """Eigenstates of the bordered matrix; rows of the weight arrays index eigenstates."""

    eigenfrequencies: np.ndarray
    qubit_weight: np.ndarray
    mode_weights: np.ndarray
    vectors: np.ndarray = field(repr=False)
    qubit_freqs: np.ndarray = None
    flux: float | None = None

    @property
    def dimension(self) -> int:
        return len(self.eigenfrequencies)

    def total_qubit_weight(self) -> np.ndarray:
        return self.qubit_weight.sum(axis=1)

    def qubit_like(self, threshold: float = QUBIT_LIKE_THRESHOLD, window=None) -> np.ndarray:
        """Indices of eigenstates with total qubit weight >= threshold, optionally inside ``window``."""
        mask = self.total_qubit_weight() >= threshold
        if window is not None:
            lo, hi = window
            mask &= (self.eigenfrequencies > lo) & (self.eigenfrequencies < hi)
        return np.flatnonzero(mask)


def transmon_frequency(spec: TransmonSpec, flux):
    """Qubit 0-1 frequency ``sqrt(8 EJ(flux) EC) - EC`` in GHz."""
    ej = spec.ej(flux)
    if np.any(ej / spec.EC < 1):
        raise TransmonApproxInvalid(
            f"EJ/EC < 1 at flux {flux!r}: transmon formula invalid (EJ_diff={spec.EJ_diff})"
        )
    f = np.sqrt(8.0 * ej * spec.EC) - spec.EC
    return f if np.ndim(f) else float(f)


def transmon_slope(spec: TransmonSpec, flux):
    """Analytic df01/dflux in GHz per flux quantum."""
    ej = spec.ej(flux)
    if np.any(ej / spec.EC < 1):
        raise TransmonApproxInvalid(f"EJ/EC < 1 at flux {flux!r}")
    x = np.pi * np.asarray(flux, dtype=float)
    d = spec.asymmetry
    c, s = np.cos(x), np.sin(x)
    dej = spec.EJ_sum ** 2 * np.pi * c * s * (d * d - 1.0) / ej
    out = math.sqrt(8.0 * spec.EC) / (2.0 * np.sqrt(ej)) * dej
    return out if np.ndim(out) else float(out)


def flux_for_frequency(spec: TransmonSpec, f_target: float) -> float:
    """Smallest flux in [0, 1/2] at which the qubit reaches ``f_target``."""
    f_max = transmon_frequency(spec, 0.0)
    # EJ/EC >= 1 region ends where cos^2 + d^2 sin^2 = (EC/EJs)^2
    lo_ratio = spec.EC / spec.EJ_sum
    d = spec.asymmetry
    if d >= lo_ratio:
        hi = 0.5
    else:
        hi = math.acos(math.sqrt((lo_ratio ** 2 - d * d) / (1 - d * d))) / math.pi
        hi *= 1 - 1e-12  # stay on the valid side of the boundary after rounding
    f_min = transmon_frequency(spec, hi)
    if not f_min - 1e-12 <= f_target <= f_max + 1e-12:
        raise NumericError(f"target {f_target} GHz outside tunable range [{f_min:.6g}, {f_max:.6g}]")
    if abs(f_target - f_max) < 1e-12:
        return 0.0
    return float(optimize.brentq(lambda x: transmon_frequency(spec, x) - f_target, 0.0, hi, xtol=1e-15))


def ec_from_capacitance(C_sigma: float) -> float:
    """Charging energy e^2 / (2 C h) in GHz for a capacitance in fF."""
    if C_sigma <= 0:
        raise NonPositiveInput("C_sigma must be positive")
    return constants.e ** 2 / (2.0 * C_sigma * 1e-15 * constants.h) / 1e9


def g_scaled(g_ref: float, f_ref_mode: float, f_ref_qubit: float, f_mode: float, f_qubit: float) -> float:
    """Coupling rescaled as sqrt(f_mode * f_qubit)."""
    if min(f_ref_mode, f_ref_qubit, f_mode, f_qubit) <= 0:
        raise NonPositiveInput("frequencies must be positive")
    return g_ref * math.sqrt((f_mode * f_qubit) / (f_ref_mode * f_ref_qubit))


def _check_modes(mode_freqs, mode_vectors):
    f = np.asarray(mode_freqs, dtype=float)
    v = np.asarray(mode_vectors, dtype=float)
    if v.ndim != 2 or v.shape[1] != f.size:
        raise DimensionMismatch(f"mode_vectors must be (n_sites, {f.size}), got {v.shape}")
    return f, v


def single_excitation_hamiltonian(mode_freqs, mode_vectors, placements: Sequence[QubitPlacement],
                                  qubit_freqs) -> np.ndarray:
    """Bordered matrix: modes first, then qubits; no direct qubit-qubit term."""
    f, v = _check_modes(mode_freqs, mode_vectors)
    q = np.atleast_1d(np.asarray(qubit_freqs, dtype=float))
    if len(placements) != q.size:
        raise DimensionMismatch(f"{len(placements)} placements but {q.size} qubit frequencies")
    n = f.size
    h = np.zeros((n + q.size, n + q.size))
    h[np.arange(n), np.arange(n)] = f
    for j, p in enumerate(placements):
        if p.site >= v.shape[0]:
            raise DimensionMismatch(f"qubit {p.qubit_id} placed on site {p.site}, lattice has {v.shape[0]}")
        row = p.g0 * v[p.site]
        h[n + j, :n] = row
        h[:n, n + j] = row
        h[n + j, n + j] = q[j]
    return h


def diagonalize_single_excitation(mode_freqs, mode_vectors, placements, qubit_freqs,
                                  flux=None) -> SingleExcitationResult:
    h = single_excitation_hamiltonian(mode_freqs, mode_vectors, placements, qubit_freqs)
    w, vec = np.linalg.eigh(h)
    n = len(mode_freqs)
    prob = np.abs(vec.T) ** 2
    return SingleExcitationResult(w, prob[:, n:], prob[:, :n], vec,
                                  np.atleast_1d(np.asarray(qubit_freqs, dtype=float)), flux)


@dataclass(frozen=True)
class BoundStateScan:
    flux: np.ndarray
    results: tuple
    band_groups: tuple = ()
    mode_vectors: np.ndarray | None = field(default=None, repr=False)

    def gaps(self) -> list[tuple[float, float]]:
        """Spectral gaps of the bare lattice (between successive band groups)."""
        g = self.band_groups
        return [(g[i][1], g[i + 1][0]) for i in range(len(g) - 1)]

    def site_amplitudes(self, i: int) -> np.ndarray:
        """Lattice-site amplitudes ``(n_sites, n_states)`` of the eigenstates at flux index ``i``."""
        if self.mode_vectors is None:
            raise DimensionMismatch("scan was built without mode vectors")
        n = self.mode_vectors.shape[1]
        return self.mode_vectors @ self.results[i].vectors[:n, :]

    def in_gap_states(self, gap: tuple[float, float], threshold: float = 0.0):
        """Per flux point, the most qubit-like eigenstate strictly inside ``gap``.

        Returns ``(freqs, weights)`` with NaN where no state qualifies.
        """
        lo, hi = gap
        freqs = np.full(len(self.results), np.nan)
        weights = np.full(len(self.results), np.nan)
        for n, res in enumerate(self.results):
            w = res.total_qubit_weight()
            idx = np.flatnonzero((res.eigenfrequencies > lo) & (res.eigenfrequencies < hi) & (w >= threshold))
            if idx.size:
                best = idx[np.argmax(w[idx])]
                freqs[n], weights[n] = res.eigenfrequencies[best], w[best]
        return freqs, weights

    def to_rows(self):
        nq = self.results[0].qubit_weight.shape[1] if self.results else 0
        header = ["flux", "state_index", "eigenfreq_GHz"] + [f"qubit_weight_{i}" for i in range(nq)]
        rows = []
        for phi, res in zip(self.flux, self.results):
            for s, f in enumerate(res.eigenfrequencies):
                rows.append([float(phi), s, float(f)] + [float(x) for x in res.qubit_weight[s]])
        return header, rows


def bound_states(lat: LatticeGraph, fam: ModeFamily, placements: Sequence[QubitPlacement],
                 qubit_specs: Sequence[TransmonSpec], flux_grid,
                 cell: UnitCellSpec | None = None) -> BoundStateScan:
    """Sweep all qubits' flux together and diagonalize at each point.

    ``flux_grid`` is 1-D (same flux for every qubit) or ``(n_flux, n_qubits)``.
    If ``cell`` is given, the corrected Bloch band groups of the infinite
    lattice are attached so callers can pick out in-gap states.
    """
    if len(placements) != len(qubit_specs):
        raise DimensionMismatch("placements and qubit_specs differ in length")
    es = finite_spectrum(lat, fam, corrected=True)
    grid = np.asarray(flux_grid, dtype=float)
    if grid.ndim == 1:
        grid = np.repeat(grid[:, None], len(placements), axis=1)
    if grid.shape[1] != len(placements):
        raise DimensionMismatch("flux grid columns must match number of qubits")
    results = []
    for row in grid:
        fq = [transmon_frequency(s, phi) for s, phi in zip(qubit_specs, row)]
        results.append(diagonalize_single_excitation(es.frequencies, es.vectors, placements, fq,
                                                     flux=float(row[0])))
    groups = tuple(band_groups(bloch_bands(cell, fam))) if cell is not None else ()
    return BoundStateScan(grid[:, 0].copy(), tuple(results), groups, es.vectors)


def dispersive_shift(g: float, delta: float) -> float:
    """chi = g^2 / delta, signed."""
    if delta == 0:
        raise ZeroDetuning("detuning must be nonzero")
    return g * g / delta


def _detunings(f, qubit_freq, min_gap):
    d = qubit_freq - f
    if np.any(np.abs(d) < min_gap):
        k = int(np.argmin(np.abs(d)))
        raise ResonantMode(f"qubit at {qubit_freq} GHz within {min_gap} GHz of mode {k} ({f[k]} GHz)")
    return d


def lamb_shifted_frequency(mode_freqs, mode_vectors, placement: QubitPlacement, qubit_freq: float,
                           min_gap: float = MIN_GAP) -> float:
    """Qubit frequency pushed by second-order coupling to every mode."""
    f, v = _check_modes(mode_freqs, mode_vectors)
    d = _detunings(f, qubit_freq, min_gap)
    return float(qubit_freq + np.sum((placement.g0 * v[placement.site]) ** 2 / d))


def exchange_coupling_perturbative(mode_freqs, mode_vectors, placement_j: QubitPlacement,
                                   placement_l: QubitPlacement, qubit_freq: float,
                                   min_gap: float = MIN_GAP) -> float:
    """Photon-mediated exchange J = sum_k g_j g_l psi_k(j) psi_k(l) / (f_q - f_k)."""
    f, v = _check_modes(mode_freqs, mode_vectors)
    for p in (placement_j, placement_l):
        if p.site >= v.shape[0]:
            raise DimensionMismatch(f"site {p.site} outside lattice of {v.shape[0]} sites")
    d = _detunings(f, qubit_freq, min_gap)
    amp = placement_j.g0 * placement_l.g0 * v[placement_j.site] * np.conj(v[placement_l.site])
    return float(np.real(np.sum(amp / d)))


def _qubit_pair(res: SingleExcitationResult):
    idx = np.sort(np.argsort(res.total_qubit_weight(), kind="stable")[-2:])
    return res.eigenfrequencies[idx]


def minimum_qubit_gap(mode_freqs, mode_vectors, placement_1: QubitPlacement, placement_2: QubitPlacement,
                      f_qubit2: float, window: float, xatol: float = 1e-13):
    """Minimum splitting of the two qubit-like states as qubit 1 is tuned through qubit 2.

    Returns ``(gap, f_qubit1_at_min)``; qubit 1 is scanned over
    ``f_qubit2 +/- window``.
    """
    def split(f1):
        res = diagonalize_single_excitation(mode_freqs, mode_vectors, [placement_1, placement_2], [f1, f_qubit2])
        a, b = _qubit_pair(res)
        return b - a

    r = optimize.minimize_scalar(split, bounds=(f_qubit2 - window, f_qubit2 + window),
                                 method="bounded", options={"xatol": xatol})
    return float(r.fun), float(r.x)


@dataclass(frozen=True)
class CrossingScan:
    flux_1: np.ndarray
    branches: np.ndarray  # (n_flux, 2) ascending
    gaps: np.ndarray
    min_gap: float
    flux_at_min: float
    flux_2: float

    def to_rows(self):
        header = ["flux_offset", "branch_index", "freq_GHz", "gap_GHz"]
        rows = []
        for phi, br, g in zip(self.flux_1, self.branches, self.gaps):
            for b in range(2):
                rows.append([float(phi - self.flux_at_min), b, float(br[b]), float(g)])
        return header, rows


def avoided_crossing_scan(lat: LatticeGraph, fam: ModeFamily, placement_1: QubitPlacement,
                          placement_2: QubitPlacement, spec_1: TransmonSpec, spec_2: TransmonSpec,
                          flux_1_grid, flux_2_fixed: float, refine: bool = True) -> CrossingScan:
    """Tune qubit 1 across qubit 2 and follow the two most qubit-like eigenstates."""
    es = finite_spectrum(lat, fam, corrected=True)
    grid = np.asarray(flux_1_grid, dtype=float)
    f2 = transmon_frequency(spec_2, flux_2_fixed)

    def pair(phi):
        f1 = transmon_frequency(spec_1, phi)
        res = diagonalize_single_excitation(es.frequencies, es.vectors, [placement_1, placement_2], [f1, f2])
        return _qubit_pair(res)

    branches = np.array([pair(phi) for phi in grid])
    gaps = branches[:, 1] - branches[:, 0]
    i = int(np.argmin(gaps))
    best_gap, best_phi = float(gaps[i]), float(grid[i])
    if refine and grid.size >= 3:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        if hi > lo:
            r = optimize.minimize_scalar(lambda x: float(np.diff(pair(x))[0]), bounds=(lo, hi),
                                         method="bounded", options={"xatol": 1e-12})
            if r.fun < best_gap:
                best_gap, best_phi = float(r.fun), float(r.x)
    return CrossingScan(grid, branches, gaps, best_gap, best_phi, float(flux_2_fixed))
