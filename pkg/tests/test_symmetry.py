import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsp.encoder import encode_atom, eval_ground
from qsp.geometry import overlap_candidates
from qsp.model import ConstraintGraph, ObjectKind as K, RelationAtom, RelationClass as RC, SpatialObject
from qsp.symmetry import (
    KIND_EXCLUSIONS, PRESERVED_BY, TC, Category, TransformBudget, TransformError, apply_transform,
    check_class_preservation, check_preservation, class_templates, make_transform, random_transform,
    sample_configuration, sym_of_graph, sym_of_relation, template_objects,
)

PRESERVING = [(rc, tc) for rc in RC for tc in TC if tc.category in PRESERVED_BY[rc] and class_templates(rc, tc)]


@st.composite
def preserving_instances(draw):
    rc, tc = draw(st.sampled_from(PRESERVING))
    name, sig = draw(st.sampled_from(class_templates(rc, tc)))
    return name, sig, tc, draw(st.integers(0, 2**32 - 1)), draw(st.booleans())


@settings(max_examples=400, deadline=None)
@given(inst=preserving_instances())
def test_preserving_transformations_keep_truth(inst):
    name, sig, tc, seed, square = inst
    objs, atom = template_objects(name, sig, square)
    f = encode_atom(atom, {o.id: o for o in objs})
    rng = random.Random(seed)
    cfg = sample_configuration(objs, rng)
    image = apply_transform(random_transform(tc, sig[0].dimension, rng), cfg, objs)

    def truth(c):
        return eval_ground(f, c, overlap_candidates(objs, c), complete=True)

    assert truth(cfg) == truth(image)


def test_known_counterexamples():
    r = check_preservation("left_of", (K.POINT2, K.SEGMENT2), TC.REFLECT_X, trials=1000)
    assert not r and r.config is not None and r.transform is not None
    r = check_preservation("perpendicular", (K.SEGMENT2, K.SEGMENT2), TC.SCALE_X, trials=1000)
    assert not r


@pytest.mark.parametrize("rc,tc", [(RC.DISTANCE, TC.SCALE_UNIFORM), (RC.TOPOLOGY, TC.ROTATE),
                                   (RC.COINCIDENCE, TC.REFLECT_Y), (RC.MEREOLOGY, TC.TRANSLATE_Y)])
def test_class_preservation_spot_checks(rc, tc):
    r = check_class_preservation(rc, tc, trials=200)
    assert r and r.trials == 200


def test_sym_of_relation_applies_kind_exclusions():
    s = sym_of_relation(RC.TOPOLOGY, [K.SPHERE3])
    assert TC.SCALE_X not in s and TC.ROTATE in s
    assert TC.ROTATE not in sym_of_relation(RC.TOPOLOGY, [K.BOX3])
    assert TC.REFLECT_X not in sym_of_relation(RC.RELATIVE_ORIENTATION)


def test_graph_budget_is_the_intersection():
    p = SpatialObject.symbolic("p", K.POINT2)
    s = SpatialObject.symbolic("s", K.SEGMENT2)
    t = SpatialObject.symbolic("t", K.SEGMENT2)
    g = ConstraintGraph.build([p, s, t], [RelationAtom("left_of", ("p", "s")), RelationAtom("perpendicular", ("s", "t"))])
    b = sym_of_graph(g)
    assert TC.REFLECT_X not in b and TC.SCALE_X not in b
    assert {TC.TRANSLATE_X, TC.TRANSLATE_Y, TC.ROTATE, TC.SCALE_UNIFORM} <= b.available


def test_budget_spending():
    b = TransformBudget()
    b2 = b.spend({TC.ROTATE})
    # rotation by any angle includes the half turn
    assert TC.ROTATE_PI not in b2
    with pytest.raises(ValueError):
        b2.spend({TC.ROTATE_PI})
    assert TC.TRANSLATE_X in b2.restrict({TC.TRANSLATE_X})
    assert TC.TRANSLATE_Y not in b2.restrict({TC.TRANSLATE_X})


def test_apply_transform_maps_parameters_exactly():
    c = SpatialObject.symbolic("c", K.CIRCLE2)
    cfg = {"x_c": Fraction(1), "y_c": Fraction(2), "r_c": Fraction(3)}
    out = apply_transform(make_transform(TC.SCALE_UNIFORM, 2, k=Fraction(1, 2)), cfg, [c])
    assert out == {"x_c": Fraction(1, 2), "y_c": 1, "r_c": Fraction(3, 2)}
    out = apply_transform(make_transform(TC.REFLECT_X, 2), cfg, [c])
    assert out["x_c"] == -1 and out["r_c"] == 3
    with pytest.raises(TransformError):
        apply_transform(make_transform(TC.SCALE_X, 2, k=Fraction(2)), cfg, [c])


def test_rectangles_stay_rectangles():
    r = SpatialObject.symbolic("r", K.RECTANGLE2)
    cfg = sample_configuration([r], random.Random(3), "fine")
    T = make_transform(TC.ROTATE, 2, direction=(Fraction(3, 5), Fraction(4, 5)))
    out = apply_transform(T, cfg, [r])
    assert out["xv_r"] ** 2 + out["yv_r"] ** 2 == 1
    assert out["w_r"] == cfg["w_r"] and out["h_r"] == cfg["h_r"]
    # a reflection reverses orientation; the frame is rebuilt from another corner
    out = apply_transform(make_transform(TC.REFLECT_Y, 2), cfg, [r])
    assert out["w_r"] > 0 and out["h_r"] > 0


def test_tables_are_consistent():
    assert PRESERVED_BY[RC.TOPOLOGY] == frozenset(Category)
    assert all(TC.SCALE_X in ex for k, ex in KIND_EXCLUSIONS.items() if k is not K.BOX3)
