import math
import os
from pathlib import Path

import pytest

import magceptor as mc

CONFIGS = Path(os.environ.get("MAGCEPTOR_CONFIG_DIR", Path(__file__).resolve().parents[2] / "configs"))


@pytest.fixture(scope="module")
def demo():
    return mc.Topology.load(CONFIGS / "demo_topology.json")


def test_dipole_closed_forms():
    on = mc.dipole_field([0, 0, 1], [0, 0, 0], [0, 0, 0.1])
    assert on[2] == pytest.approx(2e-4, rel=1e-9)
    f = mc.pair_force([0, 0, 1], [0, 0, 0], [0, 0, 1], [0, 0, 1])
    assert math.hypot(*f) == pytest.approx(6e-7, rel=1e-9)
    with pytest.raises(mc.SingularityError):
        mc.dipole_field([0, 0, 1], [0, 0, 0], [0, 0, 0])


def test_demo_identity_pattern(demo):
    m = mc.selectivity(demo, 0.005, 0.001)
    assert m["pass"]
    for r, row in enumerate(m["entries"]):
        for c, entry in enumerate(row):
            assert entry == ("DRIVE" if r == c else "ANCHOR")
    assert mc.control_entropy(demo) == pytest.approx(math.log2(3), abs=1e-9)


def test_driving_peak_scales_with_area(demo):
    a = mc.evaluate_unit(demo, "alpha", "+x")
    b = mc.evaluate_unit(demo.scaled(2.0), "alpha", "+x")
    assert a["snap_through"]
    assert b["driving_peak"] == pytest.approx(4 * a["driving_peak"], rel=1e-9)


def test_mission_trace():
    rows = mc.run_program(CONFIGS / "machine_4dof.json", (CONFIGS / "mission.prog").read_text())
    assert rows[-1]["state"] == [1, 1, 2, 0]
    assert any(r["state"] == [0, 0, 2, 1] for r in rows)


def test_crank_and_bus():
    angles = mc.crank_angles(CONFIGS / "engine_declared.json", (CONFIGS / "engine_roundrobin.prog").read_text())
    assert angles[-1][1] == pytest.approx(360.0)
    table = mc.truth_table(CONFIGS / "campaign_3x3.json")
    assert table["error_rate"] == 0.0
    assert all(table["exclusive"])


def test_errors_surface_as_python_exceptions(demo):
    with pytest.raises(ValueError):
        mc.run_program(CONFIGS / "machine_4dof.json", "+x 20 mG")
    with pytest.raises(mc.DomainError):
        mc.clopper_pearson_upper(3, 2)
