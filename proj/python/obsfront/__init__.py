"""Python access to the obsfront solvers."""

import json as _json

from . import _core
from ._core import (  # noqa: F401
    Error,
    FrontProfile,
    LVConditions,
    Obstacle,
    SystemDef,
    build_zeta,
    cubic_pair,
    eval_field,
    is_directionally_convex,
    is_star_shaped,
    lv_speed_conditions,
    lv_system,
    lv_transform,
    make_annulus_channel,
    make_disk,
    make_ellipse,
    make_rectangle,
    mask_summary,
    solve_planar_front,
)

__version__ = _core.__version__


def run_pipeline(config, pipeline, out_dir, overrides=(), assert_verdicts=False):
    """Run a scenario pipeline; returns (exit_code, summary dict)."""
    code, summary = _core.run_pipeline(str(config), pipeline, list(overrides), str(out_dir), assert_verdicts)
    return code, _json.loads(summary)
