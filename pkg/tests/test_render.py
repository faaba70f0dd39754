import math
import xml.etree.ElementTree as ET
from fractions import Fraction

import pytest

from qsp.model import ObjectKind as K, SpatialObject
from qsp.render import render_svg, render_witness

NS = "{http://www.w3.org/2000/svg}"


def _objs(*pairs):
    return [SpatialObject.symbolic(oid, kind) for oid, kind in pairs]


def test_shapes_and_labels():
    objs = _objs(("p", K.POINT2), ("s", K.SEGMENT2), ("c", K.CIRCLE2), ("r", K.RECTANGLE2))
    w = {"x_p": 0, "y_p": 0, "xa_s": 0, "ya_s": 0, "xb_s": 2, "yb_s": 1, "x_c": 1, "y_c": 1, "r_c": Fraction(1, 2),
         "x_r": -1, "y_r": -1, "xv_r": Fraction(3, 5), "yv_r": Fraction(4, 5), "w_r": 2, "h_r": 1}
    root = ET.fromstring(render_svg(w, objs))
    assert root.tag == f"{NS}svg"
    ids = {e.get("id"): e.tag.replace(NS, "") for e in root if e.get("id")}
    assert ids == {"p": "circle", "s": "line", "c": "circle", "r": "polygon"}
    assert sorted(t.text for t in root.iter(f"{NS}text")) == ["c", "p", "r", "s"]
    # y grows downwards in SVG: the segment's end above its start is drawn with a smaller y
    line = root.find(f"{NS}line")
    assert float(line.get("y2")) < float(line.get("y1"))


def test_output_is_deterministic(tmp_path):
    objs = _objs(("a", K.SPHERE3), ("b", K.BOX3))
    w = {"x_a": 0, "y_a": 0, "z_a": 0, "r_a": 1, "x_b": 3, "y_b": 0, "z_b": 0, "w_b": 1, "d_b": 2, "h_b": 1}
    one = render_witness(w, objs, tmp_path / "one.svg").read_bytes()
    two = render_witness(dict(reversed(list(w.items()))), objs, tmp_path / "two.svg").read_bytes()
    assert one == two


def test_viewbox_contains_everything():
    objs = _objs(("c", K.CIRCLE2))
    root = ET.fromstring(render_svg({"x_c": 10, "y_c": -4, "r_c": 3}, objs))
    x, y, w, h = map(float, root.get("viewBox").split())
    assert w == h
    assert x <= 7 and x + w >= 13


def test_single_point_gets_a_finite_box():
    root = ET.fromstring(render_svg({"x_p": 5, "y_p": 5}, _objs(("p", K.POINT2))))
    assert all(math.isfinite(float(v)) for v in root.get("viewBox").split())


def test_non_finite_values_are_rejected():
    with pytest.raises(ValueError):
        render_svg({"x_p": float("nan"), "y_p": 0}, _objs(("p", K.POINT2)))
