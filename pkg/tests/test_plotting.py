from __future__ import annotations

import xml.etree.ElementTree as ET

from nlosloc.experiment import run_scenario
from nlosloc.plotting import bars_svg, overlay_svg, timeline_svg
from nlosloc.simulator import ZERO_NOISE, builtin_scenario

SVG = "{http://www.w3.org/2000/svg}"


def test_svgs_parse_and_repeat():
    sc = builtin_scenario("SA", noise=ZERO_NOISE)
    out = run_scenario(sc)
    tracks = {"ped1": [p.position for f in out.frames for p in f.truth.pedestrians]}
    ests = [e.position for r in out.results for e in r.estimates]
    boxes = list(out.results[-1].spatial.boxes)

    docs = [
        overlay_svg("SA <&>", sc.boxes, boxes, tracks, ests, sc.ego_origin),
        timeline_svg("SA", out.evals),
        bars_svg("accuracy", ["SA", "SB"], [0.9, None]),
    ]
    for doc in docs:
        root = ET.fromstring(doc)
        assert root.tag == f"{SVG}svg"
    assert overlay_svg("SA", sc.boxes, boxes, tracks, ests, sc.ego_origin) == overlay_svg(
        "SA", sc.boxes, boxes, tracks, ests, sc.ego_origin
    )
    overlay = ET.fromstring(docs[0])
    assert len(overlay.findall(f".//{SVG}rect")) >= len(sc.boxes) + len(boxes)


def test_empty_inputs():
    ET.fromstring(timeline_svg("empty", []))
    ET.fromstring(bars_svg("none", [], []))
