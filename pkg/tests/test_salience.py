import pytest

from hypothesis import given, settings
from hypothesis import strategies as st

from selmem.common import *
from selmem.perception import emotion_salience, frame_salience
from selmem.type import DEFAULT_THRESHOLDS, EMOTIONS, EmotionThresholds, EmotionVector

from .conftest import emotions

unit = st.floats(min_value = 0.0, max_value = 1.0)
threshold = st.floats(min_value = 0.0, max_value = 0.99)

@pytest.mark.parametrize("p, t, expected", [
    (0.6, 0.6, 0.0),
    (1.0, 0.3, 1.0),
    (0.8, 0.6, 0.5),
    (0.1, 0.5, 0.0),
    (0.0, 0.0, 0.0),
])
def test_emotion_salience(p, t, expected):
    assert emotion_salience(p, t) == pytest.approx(expected, abs = 1e-9)

@pytest.mark.parametrize("t", [-0.1, 1.0, 1.5])
def test_threshold_domain(t):
    with pytest.raises(ThresholdError):
        emotion_salience(0.5, t)

@given(unit, unit, threshold)
def test_monotone_in_probability(p1, p2, t):
    low, high = sorted((p1, p2))
    assert emotion_salience(low, t) <= emotion_salience(high, t)

@given(unit, threshold, threshold)
def test_antitone_in_threshold(p, t1, t2):
    low, high = sorted((t1, t2))
    assert emotion_salience(p, high) <= emotion_salience(p, low) + 1e-12

@given(unit, threshold)
def test_range(p, t):
    assert 0.0 <= emotion_salience(p, t) <= 1.0 + 1e-12

def test_frame_salience_below_thresholds():
    assert frame_salience(emotions(neutral = 0.9, happy = 0.4), DEFAULT_THRESHOLDS) == 0.0

def test_frame_salience_is_the_maximum():
    thresholds = EmotionThresholds.uniform(0.5)
    assert frame_salience(emotions(happy = 0.75), thresholds) == pytest.approx(0.5)
    # 0.3 from sad, 0.7 from fear
    assert frame_salience(emotions(sad = 0.65, fear = 0.85), thresholds) == pytest.approx(0.7)

def test_frame_salience_accepts_mappings():
    raw = {e.value: 0.0 for e in EMOTIONS}
    raw["surprise"] = 1.0
    assert frame_salience(raw, {e.value: 0.2 for e in EMOTIONS}) == pytest.approx(1.0)

def test_missing_category():
    with pytest.raises(SchemaError):
        frame_salience({"happy": 0.9}, DEFAULT_THRESHOLDS)

@settings(max_examples = 200)
@given(st.lists(unit, min_size = 8, max_size = 8), st.lists(threshold, min_size = 8, max_size = 8))
def test_matches_direct_evaluation(ps, ts):
    vector = EmotionVector(dict(zip(EMOTIONS, ps)))
    thresholds = EmotionThresholds(dict(zip(EMOTIONS, ts)))
    expected = max(max(0.0, (p - t) / (1 - t)) for p, t in zip(ps, ts))
    assert frame_salience(vector, thresholds) == pytest.approx(expected, abs = 1e-9)
