"""Acceptance criteria, one check per criterion at the documented tolerances.

Run ``python tests/test_acceptance.py`` for the pass/fail table, or
``pytest tests/test_acceptance.py -v`` (the table is repeated in the
terminal summary).
"""
import time

import numpy as np
import pytest

from cpwlattice.circuitqed import (
    QubitPlacement,
    TransmonSpec,
    avoided_crossing_scan,
    bound_states,
    diagonalize_single_excitation,
    ec_from_capacitance,
    exchange_coupling_perturbative,
    flux_for_frequency,
    lamb_shifted_frequency,
    minimum_qubit_gap,
    transmon_slope,
)
from cpwlattice.config import load_preset
from cpwlattice.fluxcal import calibrate, flux_from_voltage, random_model, simulate_measurements, voltages_for_flux
from cpwlattice.lattice import Coupler, Member, UnitCellSpec, build_chain, paper_lattice
from cpwlattice.tightbinding import (
    ModeFamily,
    bloch_bands,
    default_k_grid,
    density_of_states,
    finite_spectrum,
    hopping_from_circuit,
    outer_cell_weight,
)

CELL = paper_lattice()
CHAIN = build_chain(CELL, 9, "hardwall")
HALF = ModeFamily(1, 4.889, -0.040)
FULL = ModeFamily(2, 9.726, -0.082)
G_FULL, G_HALF = 0.165, 0.0825
TRANSMON = TransmonSpec(0.122, 103.0)
RESULTS = {}


def _flip(cell, site):
    couplers = tuple(
        Coupler(c.id, tuple(Member(m.site, 1 - m.end if m.site == site else m.end, m.cell_offset)
                            for m in c.members))
        for c in cell.couplers
    )
    return UnitCellSpec(cell.sites_per_cell, couplers, cell.tags, cell.name)


def check_1():
    t1 = hopping_from_circuit(4.8957, 1, 19.5, 50)
    t2 = hopping_from_circuit(4.8957, 2, 19.5, 50)
    ok = abs(t1 * 1e3 + 46.7) <= 0.5 and abs(t2 * 1e3 + 93.5) <= 1.0
    return ok, f"t1 = {t1 * 1e3:.2f} MHz (want -46.7 +/- 0.5), t2 = {t2 * 1e3:.2f} MHz (want -93.5 +/- 1)"


def check_2():
    ec = ec_from_capacitance(117.4) * 1e3
    return abs(ec - 165) <= 1, f"EC = {ec:.2f} MHz (want 165 +/- 1)"


def check_3():
    k = default_k_grid(512)
    parts, ok = [], True
    for parity in ("symmetric", "antisymmetric"):
        fam = ModeFamily.for_parity(parity, 9.726, -0.082)
        res = bloch_bands(CELL, fam, k)
        counts = np.sum(np.abs(res.uncorrected - (fam.omega_mu - 2 * abs(fam.t0))) <= 1e-9, axis=1)
        bad = k[counts != 2]
        ok &= bad.size == 0
        extra = "" if bad.size == 0 else f", multiplicity {sorted(set(counts[counts != 2].tolist()))} at k = {bad.tolist()}"
        parts.append(f"{parity}: {int(np.sum(counts == 2))}/512 k points with multiplicity 2{extra}")
    return ok, "; ".join(parts)


def check_4():
    f = bloch_bands(CELL, FULL, default_k_grid(512)).corrected.min()
    return abs(f - 9.565) <= 0.005, f"corrected flat band {f:.4f} GHz (want 9.565 +/- 0.005)"


def check_5():
    dos = density_of_states(bloch_bands(CELL, HALF, default_k_grid(512)), 0.001)
    sup = dos.support()
    if len(sup) != 2:
        return False, f"expected two support intervals, got {len(sup)}"
    (a0, a1), (b0, b1) = sup
    gap = (b0 - a1) * 1e3
    ok = (abs(a0 - 4.81) <= 0.005 and abs(a1 - 4.84) <= 0.005 and abs(b0 - 4.89) <= 0.01
          and abs(b1 - 5.04) <= 0.01 and abs(gap - 50) <= 10)
    return ok, (f"support [{a0:.4f}, {a1:.4f}] and [{b0:.4f}, {b1:.4f}] GHz, gap {gap:.1f} MHz "
                f"(want [4.81, 4.84] +/- 0.005, [4.89, 5.04] +/- 0.01, gap 50 +/- 10)")


def _edge_state(fam, target, tol):
    es = finite_spectrum(CHAIN, fam)
    best = None
    for i, f in enumerate(es.frequencies):
        w = outer_cell_weight(es.vectors[:, i], CHAIN)
        if abs(f - target) <= tol and w > 0.5 and (best is None or abs(f - target) < abs(best[0] - target)):
            best = (f, w)
    return best


def check_6():
    half = _edge_state(HALF, 4.85, 0.02)
    full = _edge_state(FULL, 9.60, 0.04)
    ok = half is not None and full is not None
    fmt = lambda s: "none" if s is None else f"{s[0]:.4f} GHz (outer weight {s[1]:.2f})"
    return ok, f"half-wave {fmt(half)}, full-wave {fmt(full)}"


def check_7():
    grid = np.linspace(0.0, 0.3, 121)
    scan = bound_states(CHAIN, FULL, [QubitPlacement(0, 27, G_FULL)], [TRANSMON], grid, cell=CELL)
    bottom = scan.band_groups[0][0]
    f_up, w_up = scan.in_gap_states(scan.gaps()[-1], threshold=0.1)
    inside = np.isfinite(f_up)
    entry = float(f_up[inside][0]) if inside.any() else float("nan")
    upper_ok = inside.any() and abs(entry - 9.95) <= 0.05

    low = np.array([r.eigenfrequencies[0] for r in scan.results])
    low_w = np.array([r.qubit_weight[0, 0] for r in scan.results])
    qubit = np.array([r.qubit_freqs[0] for r in scan.results])
    far = qubit > bottom + 0.1
    shift = float(np.ptp(low[far])) if far.any() else 0.0
    lower_ok = bool(np.all(low < bottom)) and shift > 1e-3 and bool(np.all(low_w > 0))

    # a step may move a state at most as far as the bare qubit moves locally
    local = np.maximum(np.abs(transmon_slope(TRANSMON, grid[:-1])), np.abs(transmon_slope(TRANSMON, grid[1:])))
    local = local * np.diff(grid)
    run = np.flatnonzero(inside)
    contiguous = run.size > 0 and np.all(np.diff(run) == 1)
    ratio = np.abs(np.diff(low)) / local
    if run.size > 1:
        ratio = np.concatenate([ratio, np.abs(np.diff(f_up[run])) / local[run[:-1]]])
    cont_ok = contiguous and ratio.max() <= 1.0
    ok = bool(upper_ok and lower_ok and cont_ok)
    return ok, (f"upper in-gap state at {entry:.4f} GHz (want 9.95 +/- 0.05), qubit weight {w_up[run[0]]:.2f}; "
                f"lower bound state below {bottom:.4f} GHz at all flux, shift {shift * 1e3:.1f} MHz while qubit far "
                f"detuned; largest step {ratio.max():.2f} of the local qubit-slope bound")


def _perturbative_errors(fam, g0):
    es = finite_spectrum(CHAIN, fam)
    edge = es.frequencies.min()
    p1, p2 = QubitPlacement(1, 24, g0), QubitPlacement(2, 27, g0)
    errs = []
    for m in np.linspace(5, 14, 10):
        f2 = edge - m * g0
        gap, _ = minimum_qubit_gap(es.frequencies, es.vectors, p1, p2, f2, 0.3)
        fl = lamb_shifted_frequency(es.frequencies, es.vectors, p2, f2)
        j = exchange_coupling_perturbative(es.frequencies, es.vectors, p1, p2, fl)
        errs.append(abs(2 * abs(j) - gap) / gap)
    return np.asarray(errs)


def check_8():
    parts, ok = [], True
    for name, fam, g0 in (("full-wave", FULL, G_FULL), ("half-wave", HALF, G_HALF)):
        e = _perturbative_errors(fam, g0)
        good = bool(np.all(e <= 0.05) and np.all(np.diff(e) < 0))
        ok &= good
        parts.append(f"{name} error {e[0]:.4f} -> {e[-1]:.4f} over 5-14 g0, monotone={bool(np.all(np.diff(e) < 0))}")
    return ok, "; ".join(parts)


def _crossing_gaps(preset):
    cfg = load_preset(preset)
    fam = cfg.require_family()
    q1, q2 = cfg.qubits[:2]
    s1, s2 = q1.spec(), q2.spec()
    es = finite_spectrum(CHAIN, fam)
    edge = es.frequencies.min()
    out = []
    for d in cfg.crossing.detunings_GHz:
        phi2 = flux_for_frequency(s2, edge - d)
        centre = flux_for_frequency(s1, edge - d)
        grid = np.linspace(centre - cfg.crossing.flux_window, centre + cfg.crossing.flux_window, cfg.crossing.num)
        sc = avoided_crossing_scan(CHAIN, fam, q1.placement(), q2.placement(), s1, s2, grid, phi2)
        out.append((d, sc.min_gap))
    return sorted(out, reverse=True)


def check_9():
    parts, ok = [], True
    for preset in ("crossing_fullwave", "crossing_halfwave"):
        rows = _crossing_gaps(preset)
        gaps = [g for _, g in rows]
        good = bool(np.all(np.diff(gaps) > 0))
        ok &= good
        parts.append(f"{preset}: " + ", ".join(f"{d * 1e3:.1f} MHz -> {g * 1e3:.2f} MHz" for d, g in rows))
    return ok, "; ".join(parts)


def check_10():
    rng = np.random.default_rng(2024)
    specs = [TRANSMON, TransmonSpec(0.165, 90.0, 10.0), TransmonSpec(0.2, 60.0)]
    worst_m = worst_v = worst_phi = 0.0
    for _ in range(100):
        m = random_model(3, rng)
        res = calibrate(simulate_measurements(m, specs))
        worst_m = max(worst_m, float(np.max(np.abs(res.model.M - m.M))))
        v = rng.normal(size=3)
        worst_v = max(worst_v, float(np.max(np.abs(voltages_for_flux(m, flux_from_voltage(m, v)) - v))))
        phi = rng.uniform(-0.5, 0.5, 3)
        worst_phi = max(worst_phi, float(np.max(np.abs(flux_from_voltage(m, voltages_for_flux(m, phi)) - phi))))
    ok = worst_m <= 1e-6 and worst_v <= 1e-9 and worst_phi <= 1e-9
    return ok, (f"worst |M - M_true| = {worst_m:.2e} (<= 1e-6), voltage round trip {worst_v:.1e}, "
                f"flux round trip {worst_phi:.1e} (<= 1e-9)")


def check_11():
    rng = np.random.default_rng(11)
    k = default_k_grid(64)
    ref = bloch_bands(CELL, HALF, k).uncorrected
    drift = 0.0
    for _ in range(100):
        cell = CELL
        for s in rng.choice(6, size=int(rng.integers(1, 7))):
            cell = _flip(cell, int(s))
        drift = max(drift, float(np.max(np.abs(bloch_bands(cell, HALF, k).uncorrected - ref))))
    gauge_ok = drift <= 1e-10

    interlace_ok = True
    for _ in range(100):
        omega = rng.uniform(4, 10)
        fam = ModeFamily(int(rng.integers(1, 3)), omega, -rng.uniform(0.01, 0.1))
        es = finite_spectrum(build_chain(CELL, int(rng.integers(1, 10)), "hardwall"), fam)
        p = QubitPlacement(0, int(rng.integers(es.vectors.shape[0])), float(rng.uniform(0, 0.3)))
        w = diagonalize_single_excitation(es.frequencies, es.vectors, [p], [omega + rng.normal(0, 0.3)]).eigenfrequencies
        f = es.frequencies
        interlace_ok &= bool(np.all(w[:-1] <= f + 1e-12) and np.all(f <= w[1:] + 1e-12))

    union_err = 0.0
    for n in range(1, 7):
        for fam in (HALF, FULL):
            kk = 2 * np.pi * np.arange(n) / n
            kk = np.where(kk >= np.pi, kk - 2 * np.pi, kk)
            union = np.sort(bloch_bands(CELL, fam, kk).uncorrected.ravel())
            ring = np.sort(finite_spectrum(build_chain(CELL, n, "periodic"), fam, corrected=False).frequencies)
            union_err = max(union_err, float(np.max(np.abs(ring - union))))
    union_ok = union_err <= 1e-10

    dos_err = 0.0
    for _ in range(20):
        fam = ModeFamily(int(rng.integers(1, 3)), rng.uniform(4, 10), -rng.uniform(0.01, 0.1))
        dos = density_of_states(bloch_bands(CELL, fam, default_k_grid(128)), float(rng.uniform(5e-4, 5e-3)))
        dos_err = max(dos_err, abs(dos.integral() - 6.0))
    dos_ok = dos_err <= 1e-9

    ok = gauge_ok and interlace_ok and union_ok and dos_ok
    return ok, (f"gauge drift {drift:.1e} (<= 1e-10); interlacing on 100 systems: {interlace_ok}; "
                f"periodic vs Bloch max diff {union_err:.1e}; DOS completeness max error {dos_err:.1e}")


CRITERIA = {
    1: (check_1, 1.0),
    2: (check_2, 1.0),
    3: (check_3, 5.0),
    4: (check_4, 5.0),
    5: (check_5, 10.0),
    6: (check_6, 10.0),
    7: (check_7, 60.0),
    8: (check_8, 60.0),
    9: (check_9, 60.0),
    10: (check_10, 10.0),
    11: (check_11, 60.0),
}


def evaluate(n):
    fn, budget = CRITERIA[n]
    t = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t
    ok = bool(ok) and dt <= budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail} [{dt:.2f} s, budget {budget:g} s]"
    RESULTS[n] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, line = evaluate(n)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n)[0] for n in sorted(CRITERIA)]
    print(f"{sum(results)}/{len(results)} criteria pass")
    raise SystemExit(0 if all(results) else 1)
