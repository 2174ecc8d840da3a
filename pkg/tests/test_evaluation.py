import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mondrian_stream import ForestConfig, LabeledPoint, MondrianForest
from mondrian_stream.datagen import GeneratorConfig, make_generator
from mondrian_stream.evaluation import FadingConfusion, macro_f1, run_prequential, update_confusion

from reference import batch_macro_f1


def test_exact_counting():
    cm = FadingConfusion(2, 1.0)
    for t, p in ((0, 0), (1, 1), (0, 1)):
        update_confusion(cm, t, p)
    assert cm.matrix.tolist() == [[1, 1], [0, 1]]


def test_fading_accumulates():
    cm = FadingConfusion(2, 0.5)
    cm.update(0, 0)
    cm.update(0, 0)
    assert cm.matrix[0, 0] == 1.5


def test_fading_decays_geometrically():
    cm = FadingConfusion(2, 0.5)
    cm.update(0, 0)
    for _ in range(10):
        cm.update(1, 1)
    assert cm.matrix[0, 0] == pytest.approx(0.5**10)


def test_update_rejects_bad_labels_and_fading():
    cm = FadingConfusion(2)
    with pytest.raises(ValueError):
        cm.update(2, 0)
    with pytest.raises(ValueError):
        cm.update(0, -1)
    with pytest.raises(ValueError):
        FadingConfusion(2, 0.0)


def test_macro_f1_examples():
    assert macro_f1(np.eye(3) * 4) == 1.0
    assert macro_f1([[1, 1], [0, 1]]) == pytest.approx(2 / 3)
    assert macro_f1(np.zeros((3, 3))) == 0.0
    # label 2 never seen nor predicted: mean over labels 0 and 1 only
    m = np.zeros((3, 3))
    m[:2, :2] = [[1, 1], [0, 1]]
    assert macro_f1(m) == pytest.approx(2 / 3)
    # a label predicted but never seen counts with F1 = 0
    assert macro_f1([[2, 1, 0], [0, 0, 0], [0, 0, 0]]) == pytest.approx((0.8 + 0.0) / 2)


@given(st.lists(st.floats(0, 100), min_size=9, max_size=9), st.floats(0.01, 100))
def test_macro_f1_range_and_scale_invariance(cells, c):
    m = np.array(cells).reshape(3, 3)
    f = macro_f1(m)
    assert 0.0 <= f <= 1.0
    assert macro_f1(m * c) == pytest.approx(f, abs=1e-9)


def forest(L=2, F=3, trees=3, seed=0):
    return MondrianForest(ForestConfig(F, L, tree_count=trees, memory_budget_bytes=50_000, seed=seed))


def test_report_cadence():
    gen = make_generator(GeneratorConfig("sea", seed=0, n_points=1000))
    rows = run_prequential(gen, forest(), report_every=100)
    assert [i for i, _ in rows] == list(range(100, 1001, 100))
    rows = run_prequential(make_generator(GeneratorConfig("sea", seed=0, n_points=250)), forest())
    assert [i for i, _ in rows] == [100, 200, 250]
    with pytest.raises(ValueError):
        run_prequential([], forest(), report_every=0)


@pytest.mark.parametrize("label", [0, 1])
def test_constant_label_stream_converges(label):
    rng = np.random.default_rng(0)
    stream = [LabeledPoint(rng.normal(size=3), label) for _ in range(5000)]
    rows = run_prequential(stream, forest(), eval_fading=0.99)
    assert rows[-1][1] == pytest.approx(1.0, abs=1e-9)


def test_faded_out_label_is_dropped():
    cm = FadingConfusion(2, 0.5)
    cm.update(1, 0)
    for _ in range(30):
        cm.update(1, 1)
    assert 0.0 < cm.matrix[1, 0] and cm.macro_f1() < 1.0
    for _ in range(20):
        cm.update(1, 1)
    assert cm.macro_f1() == pytest.approx(1.0, abs=1e-12)


def test_matches_batch_oracle_without_fading():
    gen = make_generator(GeneratorConfig("randomrbf", seed=4, n_points=3000, labels=4, features=3))
    log = []
    rows = run_prequential(gen, forest(L=4, trees=4, seed=4), eval_fading=1.0, log=log)
    assert len(log) == 2999  # first point is train-only
    assert abs(rows[-1][1] - batch_macro_f1(log, 4)) <= 1e-9


def test_prediction_never_sees_current_label():
    rng = np.random.default_rng(1)
    xs = rng.normal(size=(300, 3))
    ys = rng.integers(2, size=300)
    flipped = ys.copy()
    flipped[150] = 1 - flipped[150]
    logs = []
    for labels in (ys, flipped):
        log = []
        run_prequential([LabeledPoint(x, int(y)) for x, y in zip(xs, labels)], forest(), log=log)
        logs.append(log)
    # index 149 in the log is the prediction made for point 150 (point 0 is train-only)
    assert logs[0][149][0] == logs[1][149][0]
    assert logs[0][:149] == logs[1][:149]
