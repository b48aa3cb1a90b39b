"""Run configuration: one JSON document per run, unknown keys rejected."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .circuitqed import QubitPlacement, TransmonSpec, ec_from_capacitance
from .errors import ConfigError
from .fluxcal import CrosstalkModel, MeasurementProtocol
from .lattice import LatticeGraph, UnitCellSpec, build_chain, load_cell, paper_lattice
from .spectra import PortCoupling
from .tightbinding import DEFAULT_K_POINTS, ModeFamily, hopping_from_circuit

__all__ = ["RunConfig", "load_config", "load_preset", "preset_names", "CONFIG_VERSION"]

CONFIG_VERSION = 1
BUNDLED_LATTICES = ("rhombus",)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeSection(_Strict):
    source: str = "rhombus"
    n_cells: int = Field(9, ge=1)
    boundary: Literal["periodic", "hardwall"] = "hardwall"

    def cell(self, base: Path | None = None) -> UnitCellSpec:
        if self.source in BUNDLED_LATTICES:
            return paper_lattice()
        path = Path(self.source)
        if base is not None and not path.is_absolute():
            path = base / path
        return load_cell(path)


class CircuitInputs(_Strict):
    f1: float = Field(gt=0)
    Cc: float = Field(ge=0)
    Z0: float = Field(gt=0)


class FamilySection(_Strict):
    mu: int = Field(ge=1)
    omega_mu: Optional[float] = Field(None, gt=0)
    t0: Optional[float] = None
    circuit: Optional[CircuitInputs] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.t0 is None) == (self.circuit is None):
            raise ValueError("give exactly one of 't0' or 'circuit'")
        if self.t0 is not None and self.omega_mu is None:
            raise ValueError("'omega_mu' is required when 't0' is given")
        return self

    def family(self) -> ModeFamily:
        if self.circuit is not None:
            c = self.circuit
            t0 = hopping_from_circuit(c.f1, self.mu, c.Cc, c.Z0)
            omega = self.omega_mu if self.omega_mu is not None else self.mu * c.f1
            return ModeFamily(self.mu, omega, t0)
        return ModeFamily(self.mu, self.omega_mu, self.t0)


class BandsSection(_Strict):
    n_k: int = Field(DEFAULT_K_POINTS, ge=2)
    dos_bin_width: float = Field(0.001, gt=0)


class QubitSection(_Strict):
    id: str
    site: int = Field(ge=0)
    g0: float = Field(ge=0)
    EC: Optional[float] = Field(None, gt=0)
    C_sigma: Optional[float] = Field(None, gt=0)
    EJ_sum: float = Field(gt=0)
    EJ_diff: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _one_ec(self):
        if (self.EC is None) == (self.C_sigma is None):
            raise ValueError(f"qubit {self.id}: give exactly one of 'EC' or 'C_sigma'")
        return self

    def placement(self) -> QubitPlacement:
        return QubitPlacement(self.id, self.site, self.g0)

    def spec(self) -> TransmonSpec:
        ec = self.EC if self.EC is not None else ec_from_capacitance(self.C_sigma)
        return TransmonSpec(ec, self.EJ_sum, self.EJ_diff)


class FluxGrid(_Strict):
    start: float = 0.0
    stop: float = 0.3
    num: int = Field(61, ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


class CrossingSection(_Strict):
    detunings_GHz: list[float] = Field(min_length=1)
    reference: Literal["bottom", "top"] = "bottom"
    flux_window: float = Field(0.02, gt=0)
    num: int = Field(41, ge=3)


class PortSection(_Strict):
    input_site: int = Field(ge=0)
    output_site: int = Field(ge=0)
    base_rate: float = Field(0.002, ge=0)
    kappa0: float = Field(0.001, ge=0)
    freq_points: int = Field(801, ge=2)

    def coupling(self) -> PortCoupling:
        return PortCoupling(self.input_site, self.output_site, self.base_rate, self.kappa0)


class ModelSection(_Strict):
    M: list[list[float]]
    phi_offsets: list[float]

    def model(self) -> CrosstalkModel:
        return CrosstalkModel(self.M, self.phi_offsets)


class ProtocolSection(_Strict):
    parking_flux: float = 0.25
    monitor_flux: float = Field(0.15, gt=0, lt=0.25)
    n_periods: int = Field(2, ge=1)
    noise_crossing: float = Field(0.0, ge=0)
    noise_slope: float = Field(0.0, ge=0)

    def protocol(self, seed: int | None) -> MeasurementProtocol:
        return MeasurementProtocol(parking_flux=self.parking_flux, monitor_flux=self.monitor_flux,
                                   n_periods=self.n_periods, noise_crossing=self.noise_crossing,
                                   noise_slope=self.noise_slope, seed=seed)


class FluxcalSection(_Strict):
    n_qubits: int = Field(3, ge=1)
    model: Optional[ModelSection] = None
    random_model: bool = False
    measurements: Optional[str] = None
    protocol: ProtocolSection = ProtocolSection()
    target_flux: Optional[list[float]] = None


class OutputSection(_Strict):
    dir: str = "out"
    formats: list[Literal["csv", "json", "svg"]] = ["csv"]


class RunConfig(_Strict):
    version: Literal[1]
    name: str = "run"
    lattice: LatticeSection = LatticeSection()
    family: Optional[FamilySection] = None
    bands: BandsSection = BandsSection()
    qubits: list[QubitSection] = []
    flux: FluxGrid = FluxGrid()
    crossing: Optional[CrossingSection] = None
    ports: Optional[PortSection] = None
    fluxcal: Optional[FluxcalSection] = None
    output: OutputSection = OutputSection()

    # resolved helpers

    def require_family(self) -> ModeFamily:
        if self.family is None:
            raise ConfigError("config has no 'family' section")
        return self.family.family()

    def cell(self, base: Path | None = None) -> UnitCellSpec:
        return self.lattice.cell(base)

    def chain(self, base: Path | None = None) -> LatticeGraph:
        return build_chain(self.cell(base), self.lattice.n_cells, self.lattice.boundary)


def _parse(data: dict, origin: str) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {origin}:\n{exc}") from exc
    return cfg


def _check_files(cfg: RunConfig, base: Path):
    refs = []
    if cfg.lattice.source not in BUNDLED_LATTICES:
        refs.append(cfg.lattice.source)
    if cfg.fluxcal is not None and cfg.fluxcal.measurements:
        refs.append(cfg.fluxcal.measurements)
    for ref in refs:
        p = Path(ref)
        if not p.is_absolute():
            p = base / p
        if not p.is_file():
            raise ConfigError(f"referenced file not found: {p}")


def load_config(path) -> tuple[RunConfig, Path]:
    """Parse a config file; returns the config and the directory relative paths resolve against."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = _parse(data, str(path))
    base = path.parent.resolve()
    _check_files(cfg, base)
    return cfg, base


def _presets():
    return resources.files("cpwlattice").joinpath("data", "presets")


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in _presets().iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    res = _presets().joinpath(f"{name}.json")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return _parse(json.loads(res.read_text()), f"preset {name}")

