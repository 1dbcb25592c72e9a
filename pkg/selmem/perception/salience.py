"""Emotional salience of a frame.

Each emotion contributes its activation above a category-specific threshold,
rescaled so that full intensity maps to 1. The frame salience is the largest
of these contributions, so a single strong non-dominant emotion is enough to
make a frame salient.

License:
    MIT License

    Permission is hereby granted, free of charge, to any person obtaining a copy
    of this software and associated documentation files (the "Software"), to deal
    in the Software without restriction, including without limitation the rights
    to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
    copies of the Software, and to permit persons to whom the Software is
    furnished to do so, subject to the following conditions:

    The above copyright notice and this permission notice shall be included in all
    copies or substantial portions of the Software.

    THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
    IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
    FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
    AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
    LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
    OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
    SOFTWARE.

"""
from typing import Mapping, Union

from ..common import *
from ..type import EMOTIONS, EmotionThresholds, EmotionVector

def emotion_salience(p_k: float, t_k: float) -> float:
    """Normalized activation of one emotion above its threshold.

    Args:
        p_k:
            Probability of the emotion, in [0, 1].
        t_k:
            Threshold of the emotion, in [0, 1).

    Returns:
        max(0, (p_k - t_k) / (1 - t_k)), in [0, 1].

    Raises:
        ThresholdError: t_k is outside [0, 1).
    """
    if not 0.0 <= t_k < 1.0:
        raise ThresholdError(f"Threshold must be in [0, 1), got {t_k}")
    return max(0.0, (p_k - t_k) / (1.0 - t_k))

def frame_salience(emotions: Union[EmotionVector, Mapping],
                   thresholds: Union[EmotionThresholds, Mapping]) -> float:
    """Maximum emotion salience over all eight categories.

    Raises:
        SchemaError: A category is missing from either mapping.
    """
    if not isinstance(emotions, EmotionVector):
        emotions = EmotionVector(emotions)
    if not isinstance(thresholds, EmotionThresholds):
        thresholds = EmotionThresholds(thresholds)
    return max(emotion_salience(emotions[e], thresholds[e]) for e in EMOTIONS)
