import json

import numpy as np
import pytest
from scipy.signal import find_peaks

from cpwlattice.circuitqed import QubitPlacement, TransmonSpec, bound_states, flux_for_frequency
from cpwlattice.errors import DimensionMismatch, NonPositiveInput
from cpwlattice.lattice import LatticeGraph
from cpwlattice.spectra import (
    FORMATS,
    PortCoupling,
    TransmissionTrace,
    as_table,
    colormap,
    export,
    flux_map,
    load_table,
    synth_transmission,
)
from cpwlattice.tightbinding import ModeFamily, bloch_bands, density_of_states, finite_spectrum

SPEC = TransmonSpec(0.122, 103.0)


def single_mode_trace(f0=5.0, kappa0=0.002, grid=None):
    grid = np.linspace(4.98, 5.02, 4001) if grid is None else grid
    return synth_transmission([f0], [[1.0]], PortCoupling(0, 0, 0.0, kappa0), grid)


# synth_transmission

def test_single_mode_lorentzian_fwhm():
    ports = PortCoupling(0, 0, 0.001, 0.002)
    grid = np.linspace(4.9, 5.1, 200001)
    tr = synth_transmission([5.0], [[1.0]], ports, grid)
    p = np.abs(tr.amplitude) ** 2
    assert grid[np.argmax(p)] == pytest.approx(5.0, abs=1e-6)
    above = grid[p >= p.max() / 2]
    kappa = 0.002 + 0.001 + 0.001
    assert above[-1] - above[0] == pytest.approx(kappa, abs=2e-6)


def test_dark_mode_invisible():
    v = np.array([[1.0, 0.6], [0.0, 0.8]])
    grid = np.linspace(4.9, 5.3, 401)
    ports = PortCoupling(0, 1)
    both = synth_transmission([5.0, 5.2], v, ports, grid)
    bright = synth_transmission([5.2], v[:, 1:], ports, grid)
    assert np.allclose(both.amplitude, bright.amplitude, atol=1e-15)


def test_two_mode_interference():
    grid = np.linspace(4.99, 5.03, 4001)
    ports = PortCoupling(0, 1, 0.001, 0.002)
    s = 1 / np.sqrt(2)
    same = synth_transmission([5.0, 5.02], np.array([[s, s], [s, s]]), ports, grid)
    opposite = synth_transmission([5.0, 5.02], np.array([[s, s], [s, -s]]), ports, grid)
    alone = synth_transmission([5.0], np.array([[s], [s]]), ports, grid)
    mid = np.argmin(np.abs(grid - 5.01))
    # the pole terms change sign between the modes: equal port products cancel there
    assert abs(same.amplitude[mid].imag) < 1e-12
    assert abs(same.amplitude[mid]) < 0.2 * abs(opposite.amplitude[mid])
    between = np.abs(same.amplitude[(grid > 5.002) & (grid < 5.018)])
    assert np.argmin(between) == pytest.approx(between.size // 2, abs=1)
    assert abs(opposite.amplitude[mid]) == pytest.approx(2 * abs(alone.amplitude[mid].imag), rel=1e-12)


def test_linearity_over_mode_sets(rng):
    a = rng.normal(size=(6, 6))
    f, v = np.linalg.eigh(a + a.T)
    f = 5.0 + 0.01 * f
    grid = np.linspace(4.9, 5.1, 501)
    ports = PortCoupling(1, 4)
    kappa_all = ports.rates(v)[2]
    whole = synth_transmission(f, v, ports, grid)
    parts = [synth_transmission(f[s], v[:, s], ports, grid) for s in (slice(0, 2), slice(2, 5), slice(5, 6))]
    total = parts[0] + parts[1] + parts[2]
    assert np.allclose(whole.amplitude, total.amplitude, atol=1e-12)
    assert np.array_equal(np.concatenate([ports.rates(v[:, s])[2] for s in (slice(0, 3), slice(3, 6))]), kappa_all)


def test_amplitude_bound(rng):
    a = rng.normal(size=(8, 8))
    f, v = np.linalg.eigh(a + a.T)
    ports = PortCoupling(0, 3)
    tr = synth_transmission(5 + 0.02 * f, v, ports, np.linspace(4.8, 5.2, 801))
    _, _, kappa = ports.rates(v)
    peak = np.abs(ports.base_rate * v[0] * v[3]) / (kappa / 2)
    assert np.all(np.abs(tr.amplitude) <= peak.sum() + 1e-12)


def test_peaks_at_eigenfrequencies(chain9, half):
    es = finite_spectrum(chain9, half)
    grid = np.arange(4.78, 5.06, 0.0002)
    tr = synth_transmission(es.frequencies, es.vectors, PortCoupling(0, 53, 0.0005, 0.0002), grid)
    peaks, _ = find_peaks(np.abs(tr.amplitude))
    step = grid[1] - grid[0]
    for p in grid[peaks]:
        assert np.min(np.abs(es.frequencies - p)) <= step


def test_trace_shape_errors():
    with pytest.raises(DimensionMismatch):
        synth_transmission([5.0, 5.1], [[1.0]], PortCoupling(0, 0), [5.0])
    with pytest.raises(DimensionMismatch):
        synth_transmission([5.0], [[1.0]], PortCoupling(0, 2), [5.0])
    with pytest.raises(NonPositiveInput):
        PortCoupling(0, 0, -1.0)
    with pytest.raises(DimensionMismatch):
        single_mode_trace() + TransmissionTrace(np.zeros(3), np.zeros(3))


# flux maps

def _one_mode_scan(g0, n=161):
    lat = LatticeGraph.from_couplers(1, [])
    fam = ModeFamily(2, 9.0, -0.08)
    phi0 = flux_for_frequency(SPEC, 9.0)
    grid = np.linspace(phi0 - 0.02, phi0 + 0.02, n)
    return bound_states(lat, fam, [QubitPlacement(0, 0, g0)], [SPEC], grid)


def test_flux_map_splitting_equals_2g():
    g = 0.03
    scan = _one_mode_scan(g)
    freqs = np.arange(8.9, 9.1, 0.0002)
    fm = flux_map(scan, PortCoupling(0, 0, 0.0005, 0.0005), freqs)
    splits = []
    for row in np.abs(fm.amplitude):
        peaks, _ = find_peaks(row)
        if peaks.size == 2:
            splits.append(np.diff(freqs[peaks])[0])
    assert min(splits) == pytest.approx(2 * g, abs=2 * (freqs[1] - freqs[0]))
    exact = min(np.diff(r.eigenfrequencies)[0] for r in scan.results)
    assert exact == pytest.approx(2 * g, abs=1e-5)


def test_flux_map_zero_coupling_is_flat():
    scan = _one_mode_scan(0.0, 21)
    freqs = np.arange(8.95, 9.05, 0.0005)
    fm = flux_map(scan, PortCoupling(0, 0), freqs)
    assert np.allclose(np.abs(fm.amplitude), np.abs(fm.amplitude[0])[None, :], atol=1e-15)
    assert freqs[np.argmax(np.abs(fm.amplitude[0]))] == pytest.approx(9.0, abs=5e-4)


def test_flux_map_from_iterable():
    items = [(0.0, [5.0], [[1.0]]), (0.1, [5.01], [[1.0]])]
    fm = flux_map(items, PortCoupling(0, 0), np.linspace(4.9, 5.1, 11))
    assert fm.amplitude.shape == (2, 11)
    assert fm.to_rows()[0] == ["flux", "freq_GHz", "abs"]


# export

ARTIFACT_HEADERS = {
    "bands": ["k", "band_index", "freq_uncorrected_GHz", "freq_corrected_GHz"],
    "dos": ["bin_center_GHz", "dos"],
    "trace": ["freq_GHz", "re", "im", "abs"],
    "finite": ["mode_index", "freq_uncorrected_GHz", "freq_corrected_GHz", "epsilon"],
}


@pytest.fixture(scope="module")
def artifacts(cell, chain9, half):
    bands = bloch_bands(cell, half, np.linspace(-np.pi, np.pi, 16, endpoint=False))
    return {
        "bands": bands,
        "dos": density_of_states(bands, 0.002),
        "trace": single_mode_trace(grid=np.linspace(4.99, 5.01, 21)),
        "finite": finite_spectrum(chain9, half),
    }


@pytest.mark.parametrize("kind", sorted(ARTIFACT_HEADERS))
def test_csv_header_contract(artifacts, kind, tmp_path):
    p = export(artifacts[kind], "csv", tmp_path / f"{kind}.csv")
    assert p.read_text().splitlines()[0].split(",") == ARTIFACT_HEADERS[kind]
    assert as_table(artifacts[kind]).kind == kind


@pytest.mark.parametrize("fmt", FORMATS)
@pytest.mark.parametrize("kind", sorted(ARTIFACT_HEADERS))
def test_exports_byte_identical(artifacts, kind, fmt, tmp_path):
    a = export(artifacts[kind], fmt, tmp_path / f"a.{fmt}").read_bytes()
    b = export(artifacts[kind], fmt, tmp_path / f"b.{fmt}").read_bytes()
    assert a == b


def test_json_round_trip(artifacts, tmp_path):
    for kind, obj in artifacts.items():
        p = export(obj, "json", tmp_path / f"{kind}.json")
        again = load_table(p)
        q = export(again, "json", tmp_path / f"{kind}2.json")
        assert p.read_bytes() == q.read_bytes()
        assert again == as_table(obj)


def test_csv_values_round_trip(artifacts, tmp_path):
    p = export(artifacts["bands"], "csv", tmp_path / "b.csv")
    lines = p.read_text().splitlines()[1:]
    first = [float(x) for x in lines[0].split(",")]
    assert first == list(as_table(artifacts["bands"]).rows[0])


def test_provenance_sidecar(artifacts, tmp_path):
    p = export(artifacts["dos"], "svg", tmp_path / "dos.svg", inputs={"x": 1})
    side = json.loads((tmp_path / "dos.svg.provenance.json").read_text())
    assert set(side) == {"artifact", "format", "input_sha256", "output_sha256", "tool", "tool_version"}
    assert side["artifact"] == "dos" and side["format"] == "svg"
    import hashlib
    assert side["output_sha256"] == hashlib.sha256(p.read_bytes()).hexdigest()
    other = export(artifacts["dos"], "svg", tmp_path / "dos2.svg", inputs={"x": 2})
    side2 = json.loads((tmp_path / "dos2.svg.provenance.json").read_text())
    assert side2["input_sha256"] != side["input_sha256"]
    assert other.read_bytes() == p.read_bytes()


def test_svg_well_formed(artifacts, tmp_path):
    import xml.etree.ElementTree as ET
    for kind, obj in artifacts.items():
        root = ET.parse(export(obj, "svg", tmp_path / f"{kind}.svg")).getroot()
        assert root.tag.endswith("svg")
        assert root.get("width") == "640"


def test_boundstate_and_map_svg(tmp_path):
    scan = _one_mode_scan(0.03, 11)
    export(scan, "svg", tmp_path / "bs.svg")
    fm = flux_map(scan, PortCoupling(0, 0), np.linspace(8.9, 9.1, 21))
    text = export(fm, "svg", tmp_path / "map.svg").read_text()
    assert text.count("<rect") >= 11 * 21


def test_unknown_format(artifacts, tmp_path):
    with pytest.raises(DimensionMismatch):
        export(artifacts["dos"], "png", tmp_path / "x.png")


def test_colormap_fixed():
    cm = colormap()
    assert len(cm) == 256
    assert cm[0] == "#440154" and cm[-1] == "#fde725"
    assert len(set(cm)) > 200


def test_no_temp_files_left(artifacts, tmp_path):
    export(artifacts["dos"], "csv", tmp_path / "d.csv")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["d.csv", "d.csv.provenance.json"]
