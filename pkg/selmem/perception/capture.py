"""The memorability gate and the capture pipeline.

A frame is memorable when some emotion exceeds its threshold, when its scene
is farther than the novelty threshold from every scene stored for the user,
or when the user has no stored scene yet. Memorable frames are described,
the caption is embedded and everything is persisted as a SceneMemory.

MemScore, the weighted sum of the emotion, novelty and complexity channels,
is attached to every decision as a diagnostic; it does not decide storage.

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
import logging

from collections import Counter, OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional

from ..common import *
from ..config import DEFAULT_WEIGHTS, CaptureWeights, NoveltyConfig
from ..core import Embedding
from ..store import SCENES, MemoryStore, SceneMemory
from ..type import CaptureDecision, EmotionThresholds, EmotionVector, FirstScene, Novelty, Trigger
from .novelty import novelty_score
from .salience import frame_salience

logger = logging.getLogger(__name__)

def decide_memorable(e: float, n: Novelty, t_n: float) -> CaptureDecision:
    """Apply the gate to an emotional salience `e` and a novelty `n`.

    Raises:
        DomainError: e is outside [0, 1].
    """
    if not 0.0 <= e <= 1.0:
        raise DomainError(f"Salience must be in [0, 1], got {e}")
    triggers = set()
    if e > 0.0:
        triggers.add(Trigger.EMOTION)
    if isinstance(n, FirstScene):
        triggers.add(Trigger.FIRST_SCENE)
    elif n > t_n:
        triggers.add(Trigger.NOVELTY)
    return CaptureDecision(memorable = bool(triggers), salience_e = e, novelty = n,
                           triggered_by = frozenset(triggers))

def mem_score(s_e: float, s_n: float, s_c: float, w: CaptureWeights) -> float:
    """Weighted memorability score w_e*s_e + w_n*s_n + w_c*s_c.

    Raises:
        DomainError: A channel score is outside [0, 1].
    """
    for name, value in (("s_e", s_e), ("s_n", s_n), ("s_c", s_c)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} must be in [0, 1], got {value}")
    return w.w_e * s_e + w.w_n * s_n + w.w_c * s_c

def normalized_novelty(n: Novelty, t_n: float) -> float:
    """Novelty above the threshold rescaled to [0, 1] (the first scene counts as 1)."""
    if isinstance(n, FirstScene):
        return 1.0
    if t_n >= 2.0:
        return 0.0
    return max(0.0, (n - t_n) / (2.0 - t_n))

@dataclass(frozen=True)
class FrameInput:
    user_id: str
    timestamp: int
    scene_embedding: Embedding
    emotions: EmotionVector
    complexity: Optional[float] = None
    image_ref: Optional[str] = None

    def __post_init__(self) -> None:
        if self.complexity is not None and not 0.0 <= self.complexity <= 1.0:
            raise SchemaError(f"Complexity must be in [0, 1], got {self.complexity}")
        if self.timestamp < 0:
            raise SchemaError(f"Timestamp must be non-negative, got {self.timestamp}")

@dataclass(frozen=True)
class FrameOutcome:
    frame: FrameInput
    decision: CaptureDecision
    memory: Optional[SceneMemory] = None

    @property
    def stored(self) -> bool:
        return self.memory is not None

def process_frame(frame: FrameInput, thresholds: EmotionThresholds, novelty_cfg: NoveltyConfig,
                  store: MemoryStore, describer, text_encoder,
                  weights: CaptureWeights = DEFAULT_WEIGHTS) -> FrameOutcome:
    """Gate one frame and store it if memorable.

    Frames of one user are serialized, since novelty depends on what the
    previous frame stored.

    Raises:
        UnknownUserError: The frame's user is not in the store.
        StorageError: The memory could not be persisted.
    """
    with store.user_lock(frame.user_id):
        e = frame_salience(frame.emotions, thresholds)
        history = store.pool(SCENES, frame.user_id, "scene_embedding")
        n = novelty_score(frame.scene_embedding, history.matrix)
        decision = decide_memorable(e, n, novelty_cfg.threshold_t_n)
        score = mem_score(e, normalized_novelty(n, novelty_cfg.threshold_t_n), frame.complexity or 0.0, weights)
        decision = replace(decision, mem_score = score)

        if not decision.memorable:
            logger.debug("Skipped frame of %s at %d (e=%.3f, n=%s)", frame.user_id, frame.timestamp, e, n)
            return FrameOutcome(frame, decision)

        caption, caption_embedding = _describe(frame, describer, text_encoder)
        memory = SceneMemory(
            user_id = frame.user_id,
            timestamp = frame.timestamp,
            scene_embedding = frame.scene_embedding,
            capture = decision,
            caption = caption,
            caption_embedding = caption_embedding,
            image_ref = frame.image_ref,
        )
        memory = replace(memory, id = store.put_scene(memory))
        logger.info("Stored scene %d of %s (%s)", memory.id, frame.user_id,
                    ", ".join(sorted(t.value for t in decision.triggered_by)))
        return FrameOutcome(frame, decision, memory)

def capture_frame(frame: FrameInput, thresholds: EmotionThresholds, novelty_cfg: NoveltyConfig,
                  store: MemoryStore, describer, text_encoder,
                  weights: CaptureWeights = DEFAULT_WEIGHTS) -> Optional[SceneMemory]:
    """Gate one frame; return the stored SceneMemory, or None if it was not memorable."""
    return process_frame(frame, thresholds, novelty_cfg, store, describer, text_encoder, weights).memory

def _describe(frame: FrameInput, describer, text_encoder):
    """Caption and caption embedding, or ("", None) when no caption can be produced."""
    if frame.image_ref is None:
        logger.warning("Frame of %s at %d has no image reference, storing without caption",
                       frame.user_id, frame.timestamp)
        return "", None
    try:
        caption = describer.describe_scene(frame.image_ref)
        if not caption:
            raise DescriberError(f"Empty caption for {frame.image_ref!r}")
        return caption, text_encoder.encode_text([caption])[0]
    except (DescriberError, EncoderUnavailableError) as e:
        logger.warning("Storing %s without caption: %s", frame.image_ref, e)
        return "", None

@dataclass
class CaptureReport:
    outcomes: List[FrameOutcome] = field(default_factory = list)

    @property
    def frames(self) -> int:
        return len(self.outcomes)

    @property
    def stored(self) -> int:
        return sum(1 for o in self.outcomes if o.stored)

    @property
    def skipped(self) -> int:
        return self.frames - self.stored

    def triggers(self) -> Dict[Trigger, int]:
        """Number of stored frames each condition fired for."""
        counts = Counter(t for o in self.outcomes for t in o.decision.triggered_by)
        return {t: counts.get(t, 0) for t in Trigger}

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "stored": self.stored,
            "skipped": self.skipped,
            "triggers": {t.value: c for t, c in self.triggers().items()},
        }

class CaptureSession():
    """Feeds frames of one or more users through the capture pipeline.

    Each user's frames are processed in order; different users may be
    processed in parallel.
    """

    def __init__(self, store: MemoryStore, describer, text_encoder,
                 thresholds: EmotionThresholds, novelty_cfg: NoveltyConfig = NoveltyConfig(),
                 weights: CaptureWeights = DEFAULT_WEIGHTS, n_workers: int = 1,
                 on_outcome: Optional[Callable[[int, FrameOutcome], None]] = None) -> None:
        if n_workers < 1:
            raise ConfigError(f"n_workers must be positive, got {n_workers}")
        self.store = store
        self.describer = describer
        self.text_encoder = text_encoder
        self.thresholds = thresholds
        self.novelty_cfg = novelty_cfg
        self.weights = weights
        self.n_workers = n_workers
        self.on_outcome = on_outcome

    def run(self, frames: Iterable[FrameInput]) -> CaptureReport:
        """Process all frames and return the per-frame outcomes in input order.

        Raises:
            SchemaError: A user's frames are not in timestamp order. Nothing is
                processed in that case.
        """
        frames = list(frames)
        per_user: Dict[str, List[int]] = OrderedDict()
        last: Dict[str, int] = {}
        for index, frame in enumerate(frames):
            if frame.timestamp < last.get(frame.user_id, -1):
                raise SchemaError(f"Frame {index} of user {frame.user_id} goes back in time "
                                  f"({frame.timestamp} < {last[frame.user_id]})")
            last[frame.user_id] = frame.timestamp
            per_user.setdefault(frame.user_id, []).append(index)

        outcomes: List[Optional[FrameOutcome]] = [None] * len(frames)

        def run_user(indices: List[int]) -> None:
            for index in indices:
                outcomes[index] = process_frame(frames[index], self.thresholds, self.novelty_cfg, self.store,
                                                self.describer, self.text_encoder, self.weights)

        if self.n_workers == 1 or len(per_user) < 2:
            for indices in per_user.values():
                run_user(indices)
        else:
            with ThreadPoolExecutor(max_workers = self.n_workers) as executor:
                for future in [executor.submit(run_user, indices) for indices in per_user.values()]:
                    future.result()

        report = CaptureReport(outcomes = list(outcomes))
        if self.on_outcome is not None:
            for index, outcome in enumerate(report.outcomes):
                self.on_outcome(index, outcome)
        logger.info("Capture session: %d frames, %d stored", report.frames, report.stored)
        return report
