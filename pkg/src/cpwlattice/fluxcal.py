"""Linear flux-crosstalk model, synthetic calibration data and calibration.

The model is ``phi = M @ V + phi_offsets`` with fluxes in flux quanta and
voltages in volts.  Calibration follows the usual two-step procedure:

* diagonal entries and offsets from the voltage periodicity of the crossings
  between each qubit and a fixed monitor frequency;
* off-diagonal entries from small-signal slopes ``df_i/dV_j`` at a parking
  point, normalized by the qubit's own flux sensitivity.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuitqed import TransmonSpec, flux_for_frequency, transmon_frequency, transmon_slope
from .errors import (
    DegenerateSlope,
    DimensionMismatch,
    IncompleteMeasurements,
    NumericError,
    SingularMatrix,
)

__all__ = [
    "CrosstalkModel",
    "MeasurementProtocol",
    "MeasurementSet",
    "CalibrationResult",
    "flux_from_voltage",
    "voltages_for_flux",
    "simulate_measurements",
    "calibrate",
    "random_model",
]

SINGULAR_COND = 1e12
DEGENERATE_SLOPE = 1e-6  # GHz/V


def _wrap(phi):
    return (np.asarray(phi) + 0.5) % 1.0 - 0.5


@dataclass(frozen=True)
class CrosstalkModel:
    M: np.ndarray
    phi_offsets: np.ndarray

    def __post_init__(self):
        m = np.array(self.M, dtype=float)
        off = np.array(self.phi_offsets, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"M must be square, got shape {m.shape}")
        if off.shape != (m.shape[0],):
            raise DimensionMismatch(f"phi_offsets must have length {m.shape[0]}")
        m[m == 0] = 0.0  # drop negative zeros for stable output
        off[off == 0] = 0.0
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "phi_offsets", off)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.M))

    @classmethod
    def identity(cls, n: int) -> "CrosstalkModel":
        return cls(np.eye(n), np.zeros(n))

    def to_dict(self) -> dict:
        return {"M": self.M.tolist(), "phi_offsets": self.phi_offsets.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CrosstalkModel":
        unknown = set(data) - {"M", "phi_offsets"}
        if unknown:
            raise DimensionMismatch(f"unknown crosstalk keys: {sorted(unknown)}")
        return cls(data["M"], data["phi_offsets"])


def flux_from_voltage(model: CrosstalkModel, V) -> np.ndarray:
    v = np.asarray(V, dtype=float)
    if v.shape != (model.n,):
        raise DimensionMismatch(f"expected {model.n} voltages, got shape {v.shape}")
    return model.M @ v + model.phi_offsets


def voltages_for_flux(model: CrosstalkModel, target_phi) -> np.ndarray:
    """Bias voltages that put every SQUID at ``target_phi``."""
    phi = np.asarray(target_phi, dtype=float)
    if phi.shape != (model.n,):
        raise DimensionMismatch(f"expected {model.n} fluxes, got shape {phi.shape}")
    cond = model.condition_number
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularMatrix(f"crosstalk matrix is singular (cond = {cond:.3g})", cond)
    return np.linalg.solve(model.M, phi - model.phi_offsets)


@dataclass(frozen=True)
class MeasurementProtocol:
    """Knobs for the synthetic experiment.

    ``monitor_flux`` fixes the monitor frequency as the qubit frequency at that
    flux; it must lie below 1/4 so crossing pairs around integer flux are the
    closely spaced ones.  ``parking_flux`` is where slopes are taken.
    """

    parking_flux: float | Sequence[float] = 0.25
    monitor_flux: float = 0.15
    n_periods: int = 2
    fd_span: float = 1e-2  # initial finite-difference half-span, V
    linear_tol: float = 0.01
    noise_crossing: float = 0.0  # V, std of crossing positions
    noise_slope: float = 0.0  # GHz/V, std of slopes
    seed: int | None = None

    def parking(self, n: int) -> np.ndarray:
        p = np.broadcast_to(np.asarray(self.parking_flux, dtype=float), (n,))
        return p.copy()


@dataclass(frozen=True)
class MeasurementSet:
    crossings: tuple  # per qubit, sorted crossing voltages on its own line
    slopes: np.ndarray  # slopes[i, j] = df_i/dV_j at the parking point, GHz/V
    monitor_freqs: np.ndarray
    parking_voltages: np.ndarray
    parking_flux: np.ndarray
    specs: tuple = ()

    @property
    def n(self) -> int:
        return len(self.crossings)

    def to_dict(self) -> dict:
        return {
            "crossings": [list(map(float, c)) for c in self.crossings],
            "slopes": np.asarray(self.slopes).tolist(),
            "monitor_freqs": np.asarray(self.monitor_freqs).tolist(),
            "parking_voltages": np.asarray(self.parking_voltages).tolist(),
            "parking_flux": np.asarray(self.parking_flux).tolist(),
            "specs": [{"EC": s.EC, "EJ_sum": s.EJ_sum, "EJ_diff": s.EJ_diff} for s in self.specs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementSet":
        need = {"crossings", "slopes"}
        if not need <= set(data):
            raise IncompleteMeasurements(f"measurement file lacks {sorted(need - set(data))}")
        n = len(data["crossings"])
        return cls(
            tuple(np.sort(np.asarray(c, dtype=float)) for c in data["crossings"]),
            np.asarray(data["slopes"], dtype=float),
            np.asarray(data.get("monitor_freqs", [np.nan] * n), dtype=float),
            np.asarray(data.get("parking_voltages", [np.nan] * n), dtype=float),
            np.asarray(data.get("parking_flux", [np.nan] * n), dtype=float),
            tuple(TransmonSpec(**s) for s in data.get("specs", [])),
        )


def _line_frequency(model, spec, i, V):
    return transmon_frequency(spec, flux_from_voltage(model, V)[i])


def _slope(fun, h0, tol, max_halvings=30):
    """Centered difference, halving the span until two estimates agree within
    ``tol`` (relative), then one Richardson step."""
    h = h0
    coarse = (fun(h) - fun(-h)) / (2 * h)
    for _ in range(max_halvings):
        fine = (fun(h / 2) - fun(-h / 2)) / h
        if abs(fine - coarse) <= tol * max(abs(fine), 1e-300):
            return (4 * fine - coarse) / 3
        h /= 2
        coarse = fine
    return coarse


def simulate_measurements(true_model: CrosstalkModel, transmon_specs: Sequence[TransmonSpec],
                          protocol: MeasurementProtocol | None = None) -> MeasurementSet:
    """Synthetic crossing voltages and slope matrix for a known crosstalk model."""
    protocol = protocol or MeasurementProtocol()
    n = true_model.n
    if len(transmon_specs) != n:
        raise DimensionMismatch(f"{n} bias lines but {len(transmon_specs)} transmon specs")
    rng = np.random.default_rng(protocol.seed)

    crossings, monitors = [], []
    for i, spec in enumerate(transmon_specs):
        f_mon = transmon_frequency(spec, protocol.monitor_flux)
        phi_c = flux_for_frequency(spec, f_mon)
        m_ii, off = true_model.M[i, i], true_model.phi_offsets[i]
        if m_ii == 0:
            raise SingularMatrix(f"line {i} does not couple to its own qubit", float("inf"))
        span = protocol.n_periods / abs(m_ii)
        vs = []
        k_lo = int(np.floor(-protocol.n_periods + off)) - 1
        for k in range(k_lo, k_lo + 2 * protocol.n_periods + 3):
            for phi in (k - phi_c, k + phi_c):
                v = (phi - off) / m_ii
                if -span <= v <= span:
                    vs.append(v)
        vs = np.sort(np.asarray(vs))
        if protocol.noise_crossing:
            vs = np.sort(vs + rng.normal(0.0, protocol.noise_crossing, vs.size))
        crossings.append(vs)
        monitors.append(f_mon)

    park = protocol.parking(n)
    v_park = voltages_for_flux(true_model, park)
    slopes = np.zeros((n, n))
    for i, spec in enumerate(transmon_specs):
        for j in range(n):
            def shifted(dv, i=i, j=j, spec=spec):
                v = v_park.copy()
                v[j] += dv
                return _line_frequency(true_model, spec, i, v)
            slopes[i, j] = _slope(shifted, protocol.fd_span, protocol.linear_tol)
    if protocol.noise_slope:
        slopes = slopes + rng.normal(0.0, protocol.noise_slope, slopes.shape)
    return MeasurementSet(tuple(crossings), slopes, np.asarray(monitors), v_park, park,
                          tuple(transmon_specs))


@dataclass(frozen=True)
class CalibrationResult:
    model: CrosstalkModel
    residuals: np.ndarray  # same shape as M
    offset_residuals: np.ndarray
    flux_slopes: np.ndarray = field(default=None)  # df_i/dphi_i used for normalization

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["residuals"] = self.residuals.tolist()
        out["offset_residuals"] = self.offset_residuals.tolist()
        return out


def _diag_from_crossings(vs: np.ndarray):
    if vs.size < 3:
        raise IncompleteMeasurements("need at least three crossings per line to fix the period")
    periods = vs[2:] - vs[:-2]
    period = float(np.mean(periods))
    if period <= 0:
        raise IncompleteMeasurements("crossing voltages do not advance")
    m_ii = 1.0 / period
    gaps = np.diff(vs)
    # closely spaced pairs straddle integer flux
    mids = [0.5 * (vs[k] + vs[k + 1]) for k in range(gaps.size) if gaps[k] < 0.5 * period]
    if not mids:
        raise IncompleteMeasurements("no crossing pair straddles integer flux")
    est = _wrap(-m_ii * np.asarray(mids))
    ref = est[0]
    est = ref + _wrap(est - ref)
    phi = float(_wrap(np.mean(est)))
    return m_ii, phi, float(np.std(1.0 / periods)), float(np.std(est))


def calibrate(measurements: MeasurementSet, slope_source: str = "diagonal",
              degenerate_tol: float = DEGENERATE_SLOPE) -> CalibrationResult:
    """Recover the crosstalk model.

    ``slope_source="diagonal"`` normalizes by ``df_i/dV_i / M_ii`` (data only);
    ``"model"`` uses the transmon model at the parking flux instead and needs
    ``measurements.specs``.  Residuals: diagonal entries carry the scatter of
    the per-period estimates; off-diagonal entries the disagreement between
    the two normalizations when specs are available, else zero.
    """
    n = measurements.n
    slopes = np.asarray(measurements.slopes, dtype=float)
    if n == 0 or slopes.shape != (n, n) or not np.all(np.isfinite(slopes)):
        raise IncompleteMeasurements(f"need an {n}x{n} finite slope matrix, got shape {slopes.shape}")
    if slope_source not in ("diagonal", "model"):
        raise NumericError(f"slope_source must be 'diagonal' or 'model', got {slope_source!r}")

    diag = np.zeros(n)
    offsets = np.zeros(n)
    residuals = np.zeros((n, n))
    off_res = np.zeros(n)
    for i, vs in enumerate(measurements.crossings):
        diag[i], offsets[i], residuals[i, i], off_res[i] = _diag_from_crossings(np.asarray(vs, dtype=float))

    data_slope = np.diag(slopes) / diag
    model_slope = None
    if measurements.specs:
        if len(measurements.specs) != n:
            raise IncompleteMeasurements("specs list does not match number of lines")
        park = np.asarray(measurements.parking_flux, dtype=float)
        model_slope = np.array([transmon_slope(s, p) for s, p in zip(measurements.specs, park)])
    elif slope_source == "model":
        raise IncompleteMeasurements("model-based normalization needs transmon specs")

    fprime = data_slope if slope_source == "diagonal" else model_slope
    bad = np.flatnonzero(np.abs(np.diag(slopes) if slope_source == "diagonal" else fprime) < degenerate_tol)
    if bad.size:
        raise DegenerateSlope(f"qubit(s) {bad.tolist()} parked at a flux sweet spot; df/dphi ~ 0")

    M = slopes / fprime[:, None]
    M[np.diag_indices(n)] = diag
    if model_slope is not None and np.all(np.abs(model_slope) >= degenerate_tol):
        alt = slopes / model_slope[:, None]
        mask = ~np.eye(n, dtype=bool)
        residuals[mask] = (M - alt)[mask]
    return CalibrationResult(CrosstalkModel(M, offsets), residuals, off_res, fprime)


def random_model(n: int, rng: np.random.Generator, max_ratio: float = 0.05,
                 diag_range=(0.5, 2.0)) -> CrosstalkModel:
    """Well-conditioned model: positive diagonal, off-diagonals within ``max_ratio`` of it."""
    d = rng.uniform(*diag_range, n)
    M = rng.uniform(-max_ratio, max_ratio, (n, n)) * d[:, None]
    M[np.diag_indices(n)] = d
    return CrosstalkModel(M, rng.uniform(-0.5, 0.5, n))
