"""SVG rendering: valid XML, expected elements, deterministic output."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from gptraj.environment import AxisBox, WorldSpec
from gptraj.runtime import ProblemSpec, SimConfig, run_steap
from gptraj.se2 import Se2Pose
from gptraj.states import MobileConfig
from gptraj.svgplot import render_run_svg, save_run_svg

_NS = "{http://www.w3.org/2000/svg}"


def small_record():
    world = WorldSpec(
        np.array([16.0, 12.0]),
        0.1,
        (AxisBox(np.array([0.0, 1.5]), np.array([1.2, 1.2])),
         AxisBox(np.array([-2.0, -2.5]), np.array([1.0, 2.0]))),
    )
    spec = ProblemSpec(
        start=MobileConfig(Se2Pose(-5.0, -3.0, 0.5), np.array([0.0, 3.0])),
        goal=MobileConfig(Se2Pose(5.0, 3.0, 0.5), np.array([0.0, 3.0])),
        world=world,
        n_intervals=5,
        total_time=5.0,
    )
    return run_steap(spec, SimConfig(n_dyn=0.03, n_cam=0.02, seed=4)), spec


def test_svg_parses_and_has_layers():
    record, spec = small_record()
    svg = render_run_svg(record)
    root = ET.fromstring(svg)
    assert root.tag == f"{_NS}svg"
    rects = root.findall(f"{_NS}rect")
    polylines = root.findall(f"{_NS}polyline")
    circles = root.findall(f"{_NS}circle")
    # background + border + one rect per obstacle
    assert len(rects) == 2 + len(spec.world.obstacles)
    # plan + truth + estimate
    assert len(polylines) == 3
    n_meas = sum(1 for m in record.measurements if m is not None)
    # measurement dots + start dot + goal ring
    assert len(circles) == n_meas + 2
    assert root.findall(f"{_NS}text")


def test_svg_deterministic():
    record, _ = small_record()
    assert render_run_svg(record) == render_run_svg(record)


def test_svg_coordinates_inside_canvas():
    record, _ = small_record()
    root = ET.fromstring(render_run_svg(record))
    width = float(root.get("width"))
    height = float(root.get("height"))
    for poly in root.findall(f"{_NS}polyline"):
        for pair in poly.get("points").split():
            x, y = map(float, pair.split(","))
            assert -1 <= x <= width + 1
            assert -1 <= y <= height + 1


def test_save_svg(tmp_path):
    record, _ = small_record()
    out = save_run_svg(record, tmp_path / "run.svg", width=600)
    text = out.read_text()
    assert text.startswith("<svg")
    assert 'width="600"' in text
