import math
import os
from pathlib import Path

import pytest

import obsfront

SOURCE = Path(os.environ.get("OBSFRONT_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_cubic_front_speed():
    prof = obsfront.solve_planar_front(obsfront.cubic_pair(0.25))
    assert prof.c == pytest.approx(math.sqrt(2.0) * 0.25, rel=1e-3)
    assert prof.strictly_increasing
    # Half-level at the origin.
    assert prof(0, 0.0) == pytest.approx(0.5, abs=1e-3)


def test_field_and_lv_conditions():
    f = obsfront.eval_field(obsfront.cubic_pair(0.25), [0.5, 0.5])
    assert f[0] == pytest.approx(0.0625)
    cond = obsfront.lv_speed_conditions(1.1, 2.0, 1.0, 1.0)
    assert cond.P2 and cond.any
    sym = obsfront.solve_planar_front(obsfront.lv_system(2.0, 2.0, 1.0, 1.0))
    assert abs(sym.c) <= 1e-3


def test_geometry_predicates():
    verdict, witness = obsfront.is_star_shaped(obsfront.make_disk(1.0), 0.0, 0.0)
    assert verdict == "true" and witness is None
    verdict, witness = obsfront.is_star_shaped(obsfront.make_annulus_channel(2.0, 3.0, 0.1), 0.0, 2.5)
    assert verdict == "false"
    assert math.hypot(*witness) == pytest.approx(2.0, abs=0.05)
    with pytest.raises(obsfront.Error):
        obsfront.is_star_shaped(obsfront.make_disk(1.0), 3.0, 0.0)


def test_front_pipeline(tmp_path):
    code, summary = obsfront.run_pipeline(SOURCE / "configs" / "front_cubic.yaml", "front", tmp_path,
                                          assert_verdicts=True)
    assert code == 0
    assert summary["c"]["value"] == pytest.approx(0.35355, rel=1e-3)
    assert (tmp_path / "manifest.json").exists()


def test_bad_config_raises(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("obstacle:\n  kind: disk\n")
    with pytest.raises(obsfront.Error, match="system"):
        obsfront.run_pipeline(bad, "front", tmp_path / "out")
