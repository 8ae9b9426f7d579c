"""Polar reduced models, backbone curves and forced response sweeps."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from ssmkit import (ManifoldExpansion, ValidationError, backbone,
                    compute_manifold, extract_polar_rom, frc_sweep,
                    leading_order, master_spectrum, oscillator_chain,
                    physical_amplitude, rom_integrate, stability_jacobian,
                    write_backbone_csv, write_frc_csv, write_frc_json,
                    write_frc_svg)
from ssmkit.multiindex import MultiIndexSet


def duffing_manifold(order=5):
    """Conservative single mass between two walls, cubic springs."""
    sys = oscillator_chain(1, m=1.0, k=1.0, c=0.0, kappa=0.3)
    ms = master_spectrum(sys, select={"mode": "pair", "pair": 1}, n_outer=0)
    return compute_manifold(sys, ms, order=order)


def duffing_frequency(a, k2=2.0, beta=0.6):
    """Oscillation frequency of x'' + k2 x + beta x^3 = 0 at amplitude a."""
    val, _ = quad(lambda phi: 1.0 / np.sqrt(
        k2 + beta * a * a * (1.0 + np.sin(phi) ** 2) / 2.0), 0.0, np.pi / 2)
    return 2.0 * np.pi / (4.0 * val)


def resonant_coefficient(manifold, Omega):
    """Rotating-frame forcing coefficient the sweep uses at one Omega."""
    rom = extract_polar_rom(manifold)
    override = {(1,): [rom.row], (-1,): [rom.partner]}
    nonaut = leading_order(manifold.system, manifold.master, [Omega],
                           style=manifold.style, resonant_modes=override)
    return manifold.system.eps * complex(nonaut.s0((1,))[rom.row]), nonaut


def test_polar_rom_reads_resonant_monomials(chain_mode2_man5):
    rom = extract_polar_rom(chain_mode2_man5)
    ms = chain_mode2_man5.master
    assert rom.lam.imag > 0
    assert rom.lam == ms.lambdas[rom.row]
    assert rom.partner == 1 - rom.row
    assert rom.gammas.shape == (2,)
    assert rom.eta == 1 and rom.f == 0.0

    mis = MultiIndexSet(3, 2)
    total = sum(chain_mode2_man5.R[3][rom.row, pos]
                for pos, t in enumerate(mis.tuples())
                if sum(1 for k in t if k == rom.row) == 2)
    assert abs(rom.gammas[0] - total) < 1e-15


def test_polar_rom_validations(lorenz_man3, lorenz_master,
                               chain10_forced, chain_mode2_master):
    with pytest.raises(ValidationError, match="complex conjugate"):
        extract_polar_rom(lorenz_man3)
    sys, _ = lorenz_master
    ms1 = master_spectrum(sys, select=[2], n_outer=2)
    man1 = compute_manifold(sys, ms1, order=1)
    with pytest.raises(ValidationError, match="two-dimensional"):
        extract_polar_rom(man1)
    graph_man = compute_manifold(chain10_forced, chain_mode2_master,
                                 order=3, style="graph")
    with pytest.raises(ValidationError, match="normal-form style"):
        extract_polar_rom(graph_man)


def test_backbone_matches_periodic_orbit_frequency():
    man = duffing_manifold()
    curve = backbone(man, rho_max=0.16, n=9, dof=0)
    assert curve.rho[0] == 0.0
    assert abs(curve.omega[0] - np.sqrt(2.0)) < 1e-12
    for r, w, a in zip(curve.rho[1:], curve.omega[1:], curve.amp[1:]):
        w_orbit = duffing_frequency(a)
        assert abs(w - w_orbit) < 1e-5 * w_orbit
    # conservative models keep the radial dynamics silent
    assert abs(curve.rom.gammas.real).max() < 1e-9


def test_backbone_rejects_damped_pairs(chain_mode2_man5):
    with pytest.raises(ValidationError, match="forced response"):
        backbone(chain_mode2_man5, rho_max=0.1)


def test_backbone_validates_rho_max():
    man = duffing_manifold(order=3)
    with pytest.raises(ValidationError, match="rho_max"):
        backbone(man, rho_max=0.0)


def test_frc_points_are_polar_fixed_points(chain_mode2_man5):
    result = frc_sweep(chain_mode2_man5, [0.56, 0.6158, 0.66])
    assert result.eta == 1
    rom = result.rom
    assert [pt["Omega"] for pt in result.points] == \
        sorted(pt["Omega"] for pt in result.points)
    for Omega in result.omegas():
        f, _ = resonant_coefficient(chain_mode2_man5, Omega)
        for pt in result.at(Omega):
            rho, psi = pt["rho"], pt["psi"]
            rot = f * np.exp(-1j * psi)
            assert abs(rom.a(rho) + rot.real) < 1e-10
            assert abs(rom.b(rho, Omega) + rot.imag) < 1e-10


def test_frc_default_dof_is_largest_modal_row(chain_mode2_man5):
    result = frc_sweep(chain_mode2_man5, [0.6158])
    rom = result.rom
    want = int(np.argmax(np.abs(chain_mode2_man5.master.V[:, rom.row])))
    assert result.dofs == [want]


def test_frc_amplitudes_match_the_lift(chain_mode2_man5):
    result = frc_sweep(chain_mode2_man5, [0.60], dofs=(4,))
    f, nonaut = resonant_coefficient(chain_mode2_man5, 0.60)
    for pt in result.points:
        want = physical_amplitude(chain_mode2_man5, pt["rho"], pt["psi"], 4,
                                  nonaut=nonaut, eps=result.eps, eta=1)
        assert abs(pt["amp"][4] - want) < 1e-12


def test_frc_validations(chain10, chain10_forced, chain_mode2_master,
                         chain_mode2_man5):
    unforced = compute_manifold(chain10, chain_mode2_master, order=3)
    with pytest.raises(ValidationError, match="backbone"):
        frc_sweep(unforced, [0.6])
    with pytest.raises(ValidationError, match="backbone"):
        frc_sweep(chain_mode2_man5, [0.6], eps=0.0)
    with pytest.raises(ValidationError, match="omega_values is empty"):
        frc_sweep(chain_mode2_man5, [])
    with pytest.raises(ValidationError, match="no forcing harmonic"):
        frc_sweep(chain_mode2_man5, [0.6], eta=3)
    detached = ManifoldExpansion.from_dict(chain_mode2_man5.to_dict())
    with pytest.raises(ValidationError, match="no system attached"):
        frc_sweep(detached, [0.6])


def test_stability_jacobian_rejects_the_origin(chain_mode2_man5):
    rom = extract_polar_rom(chain_mode2_man5)
    with pytest.raises(ValidationError, match="singular at rho = 0"):
        stability_jacobian(rom, 0.0)


def test_rom_integrate_matches_radial_equation(chain_mode2_man5):
    rom = extract_polar_rom(chain_mode2_man5)
    out = rom_integrate(rom, 0.05, (0.0, 200.0))
    radial = solve_ivp(lambda t, r: [float(rom.a(r[0]))], (0.0, 200.0),
                       [0.05], rtol=1e-10, atol=1e-13)
    assert abs(out["rho"][-1] - radial.y[0, -1]) < 1e-7
    assert out["rho"][-1] < 0.05


def test_rom_integrate_settles_on_stable_branch(chain_mode2_man5):
    Omega = 0.6158
    result = frc_sweep(chain_mode2_man5, [Omega])
    stable = [pt for pt in result.points if pt["stable"]]
    pt = max(stable, key=lambda q: q["rho"])
    f, _ = resonant_coefficient(chain_mode2_man5, Omega)
    rom = result.rom.with_forcing(f, Omega)
    q0 = 1.1 * pt["rho"] * np.exp(1j * (pt["psi"] + 0.2))
    out = rom_integrate(rom, q0, (0.0, 800.0))
    assert abs(out["rho"][-1] - pt["rho"]) < 1e-6
    assert abs(np.exp(1j * out["psi"][-1]) - np.exp(1j * pt["psi"])) < 1e-4


def test_forced_rom_requires_a_frame(chain_mode2_man5):
    rom = extract_polar_rom(chain_mode2_man5).with_forcing(0.01, None)
    with pytest.raises(ValidationError, match="needs Omega"):
        rom_integrate(rom, 0.01, (0.0, 1.0))


def test_amplitude_lift_linearizes_at_small_rho(chain_mode2_man5):
    ms = chain_mode2_man5.master
    rom = extract_polar_rom(chain_mode2_man5)
    rho = 1e-6
    for dof in (0, 4, 9):
        amp = physical_amplitude(chain_mode2_man5, rho, 0.0, dof)
        want = 2.0 * rho * abs(ms.V[dof, rom.row])
        assert abs(amp - want) < 5e-3 * want


def test_frc_writers_are_deterministic(tmp_path, chain_mode2_man5):
    result = frc_sweep(chain_mode2_man5, [0.60, 0.6158], dofs=(4,))
    csv1, csv2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_frc_csv(result, csv1)
    write_frc_csv(result, csv2)
    assert csv1.read_bytes() == csv2.read_bytes()
    lines = csv1.read_text().splitlines()
    assert lines[0] == "Omega,rho,psi,stable,amp_dof_4"
    assert len(lines) == 1 + len(result.points)
    first = lines[1].split(",")
    assert float(first[0]) == result.points[0]["Omega"]
    assert first[3] in ("0", "1")

    js1, js2 = tmp_path / "a.json", tmp_path / "b.json"
    write_frc_json(result, js1)
    write_frc_json(result, js2)
    assert js1.read_bytes() == js2.read_bytes()
    data = json.loads(js1.read_text())
    assert data["kind"] == "frc"
    assert len(data["points"]) == len(result.points)

    svg = tmp_path / "a.svg"
    write_frc_svg(result, svg)
    root = ET.fromstring(svg.read_text())
    circles = [el for el in root.iter()
               if el.tag.endswith("circle")]
    assert len(circles) == len(result.points)


def test_backbone_writer_roundtrips_numbers(tmp_path):
    man = duffing_manifold()
    curve = backbone(man, rho_max=0.1, n=5, dof=0)
    path = tmp_path / "bb.csv"
    write_backbone_csv(curve, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "rho,omega,amp_dof_0"
    got = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(got[:, 0], curve.rho)
    assert np.array_equal(got[:, 1], curve.omega)
    assert np.array_equal(got[:, 2], curve.amp)
