"""The controller connecting the command line to the memory engine.

The command line parses arguments and a configuration file into a CliConfig
and a Command; the Application translates the command into operations on the
store, the capture pipeline, the retrieval and the evaluation harness, prints
the outcome and maps errors to exit codes.

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
import enum
import hashlib
import json
import logging
import sys
import time

from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO, Tuple, Union

import numpy as np

from .common import *
from .config import BurninConfig, CliConfig, CvConfig
from .core import Embedding
from .encoders import (
    FixtureAnnotations,
    FrameAnnotation,
    RemoteClient,
    RemoteMultimodalEncoder,
    RemoteTextEncoder,
    SyntheticWorld,
    parse_emotions,
)
from .eval import (
    RatingsMatrix,
    MemorabilityFeatures,
    alpha_sweep,
    baseline_interval,
    baseline_random,
    evaluate_fixed_scores,
    human_consistency,
    make_benchmark,
    make_synthetic_memorability_study,
    nested_cv_memorability,
)
from .eval.report import memorability_table, retrieval_table, write_report
from .identity import (
    Intent,
    NeedsClarification,
    NewUser,
    RuleBasedIntentClassifier,
    classify_intent,
    extract_profile_facts,
    identify_user,
)
from .perception import CaptureSession, FrameInput, FrameOutcome
from .retrieval import RetrievalResult, hybrid_retrieve
from .store import USER_ID_PATTERN, EpisodeMemory, MemoryStore, SceneMemory, UserProfile, check_user_id
from .type import FIRST_SCENE, CaptureDecision, Trigger
from .utils import now_millis

logger = logging.getLogger(__name__)

# Interval baselines reported next to the random one
BASELINE_INTERVALS = (5, 10)

# The synthetic vocabulary holds 12 x 12 concepts
MAX_BENCH_CONCEPTS = 144

ASK_NAME = "I don't know your name yet. Please tell me: \"My name is ...\""

class Command(enum.Enum):
    CAPTURE = "capture"
    QUERY   = "query"
    USERS   = "users"
    EVAL    = "eval"
    BENCH   = "bench"
    INSPECT = "inspect"

class SessionFrame():
    """One line of a capture session file."""

    REQUIRED = ("user", "ref", "timestamp")

    def __init__(self, data: dict) -> None:
        if not isinstance(data, dict):
            raise SchemaError("Frame must be a JSON object")
        missing = [key for key in self.REQUIRED if key not in data]
        if missing:
            raise SchemaError(f"Frame lacks {', '.join(missing)}")
        self.user_id = check_user_id(data["user"])
        self.name = str(data.get("name") or "")
        self.ref = data["ref"]
        if not isinstance(self.ref, str) or not self.ref:
            raise SchemaError("'ref' must be a non-empty string")
        if isinstance(data["timestamp"], bool) or not isinstance(data["timestamp"], int):
            raise SchemaError("'timestamp' must be an integer (milliseconds)")
        self.timestamp = data["timestamp"]
        if self.timestamp < 0:
            raise SchemaError("'timestamp' must be non-negative")
        concept = data.get("concept")
        self.concept = None if concept is None else str(concept)
        self.emotions = parse_emotions(data.get("emotions"))
        complexity = data.get("complexity")
        self.complexity = None if complexity is None else float(complexity)
        if self.complexity is not None and not 0.0 <= self.complexity <= 1.0:
            raise SchemaError(f"'complexity' must be in [0, 1], got {self.complexity}")

    @property
    def annotation(self) -> FrameAnnotation:
        return FrameAnnotation(self.ref, self.concept, self.emotions)

def read_session(path: Union[str, Path]) -> List[SessionFrame]:
    """Read a capture session (JSON lines, blank lines ignored).

    Raises:
        ConfigError: The file does not exist.
        SchemaError: A line is malformed; the message names file and line.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Session file not found: {path}")
    frames = []
    with open(path, encoding = "utf-8") as f:
        for line_no, line in enumerate(f, start = 1):
            if not line.strip():
                continue
            try:
                frames.append(SessionFrame(json.loads(line)))
            except (ValueError, TypeError) as e:
                raise SchemaError(f"{path}:{line_no}: {e}") from None
    return frames

class Application():
    """Runs one command against the store named by the configuration."""

    def __init__(self, cfg: CliConfig, out: Optional[TextIO] = None) -> None:
        self.cfg = cfg
        self.out = out if out is not None else sys.stdout

        # Every command maps to one callback; each returns the exit code
        self.handlers: Dict[Command, Callable[..., int]] = {
            Command.CAPTURE: self.cb_capture,
            Command.QUERY:   self.cb_query,
            Command.USERS:   self.cb_users,
            Command.EVAL:    self.cb_eval,
            Command.BENCH:   self.cb_bench,
            Command.INSPECT: self.cb_inspect,
        }

    def run(self, command: Command, **kwargs) -> int:
        """Execute `command` and return the process exit code."""
        try:
            self.cfg.validate()
            return self.handlers[command](**kwargs)
        except UnknownUserError as e:
            self.error(f"Unknown user: {e.args[0] if e.args else e}")
            return EXIT_NOT_FOUND
        except (ConfigError, SchemaError, DimensionError, StorageError, DegenerateInputError,
                UnknownRefError) as e:
            self.error(str(e))
            return EXIT_CONFIG
        except EncoderUnavailableError as e:
            self.error(f"{e} (retry after {e.retry_after:.1f} s)")
            return EXIT_CONFIG

    def print(self, text: str = "") -> None:
        print(text, file = self.out)

    def error(self, text: str) -> None:
        logger.error(text)
        print(f"error: {text}", file = sys.stderr)

    # ------------------------------------------------------------------
    # Plumbing

    def open_store(self, create: bool = False) -> MemoryStore:
        path = Path(self.cfg.store_path)
        if not create and not path.is_dir():
            raise ConfigError(f"No memory store at {path}")
        return MemoryStore.open(path, self.cfg.text_dim, self.cfg.mm_dim)

    def encoders(self, annotations: Optional[FixtureAnnotations] = None) -> Tuple:
        """(text encoder, multimodal encoder, describer, emotion detector) of the configured backend.

        Scene descriptions and emotions always come from the frame annotations.
        """
        world = SyntheticWorld(self.cfg.world_config(), annotations)
        if self.cfg.encoder == "synthetic":
            return world.text_encoder(), world.multimodal_encoder(), world.describer(), world.detector()
        client = RemoteClient(self.cfg.encoder[len("remote:"):])
        return (RemoteTextEncoder(client, self.cfg.text_dim), RemoteMultimodalEncoder(client, self.cfg.mm_dim),
                world.describer(), world.detector())

    # ------------------------------------------------------------------
    # Commands

    def cb_capture(self, session_file: Union[str, Path], workers: int = 1) -> int:
        """Stream the frames of a session file through the memorability gate."""
        frames = read_session(session_file)
        annotations = FixtureAnnotations(f.annotation for f in frames)
        text_encoder, mm_encoder, describer, detector = self.encoders(annotations)
        store = self.open_store(create = True)

        for frame in frames:
            if not store.has_user(frame.user_id):
                store.put_user(UserProfile(frame.user_id, display_name = frame.name))

        inputs = [FrameInput(user_id = f.user_id, timestamp = f.timestamp,
                             scene_embedding = mm_encoder.encode_image_ref(f.ref),
                             emotions = detector.detect_emotions(f.ref),
                             complexity = f.complexity, image_ref = f.ref) for f in frames]

        def report(index: int, outcome: FrameOutcome) -> None:
            self.print(format_outcome(index, outcome))

        session = CaptureSession(store, describer, text_encoder, self.cfg.emotion_thresholds,
                                 self.cfg.novelty_config(), self.cfg.weights, n_workers = workers,
                                 on_outcome = report)
        result = session.run(inputs)

        triggers = ", ".join(f"{t.value} {c}" for t, c in result.triggers().items())
        self.print(f"{result.frames} frames, {result.stored} stored, {result.skipped} skipped ({triggers})")
        return EXIT_OK

    def cb_query(self, user: str, text: str, transcript: Optional[Union[str, Path]] = None,
                 timestamp: Optional[int] = None) -> int:
        """Identify the user, classify the utterance and act on its intent.

        `user` is a user id or a name. A name goes through identification
        first; an unknown name creates a profile. Users without a display name
        are asked for it before anything is stored or recalled.

        A session end stores the `transcript` file as the episode, or the
        utterance itself when no transcript is given.
        """
        store = self.open_store()
        classifier = RuleBasedIntentClassifier.from_yaml(self.cfg.intent_patterns)
        text_encoder, mm_encoder, _, _ = self.encoders()

        user_id = self.resolve_user(user, store)
        if user_id is None:
            return EXIT_OK

        intent = classify_intent(text, classifier)
        logger.debug("Intent of %r: %s", text, intent.value)
        profile = store.get_user(user_id)

        if intent is Intent.PROFILE_UPDATE:
            facts = extract_profile_facts(text)
            if not profile.display_name and "name" not in facts:
                self.print(ASK_NAME)
                return EXIT_OK
            if not facts:
                self.print("Nothing to remember in that.")
                return EXIT_OK
            name = facts.get("name") if not profile.display_name else None
            store.update_user(user_id, display_name = name, profile_facts = facts)
            for key, value in sorted(facts.items()):
                self.print(f"Remembered {key}: {value}")
            return EXIT_OK

        # Memories are only stored or recalled for users who told us their name
        if not profile.display_name:
            self.print(ASK_NAME)
            return EXIT_OK

        if intent is Intent.SESSION_END:
            if transcript is not None:
                path = Path(transcript)
                if not path.is_file():
                    raise ConfigError(f"Transcript file not found: {path}")
                content = path.read_text(encoding = "utf-8").strip()
            else:
                content = text
            if not content:
                raise SchemaError("Empty transcript")
            episode = EpisodeMemory(user_id = user_id,
                                    timestamp = now_millis() if timestamp is None else timestamp,
                                    transcript = content,
                                    text_embedding = text_encoder.encode_text([content])[0])
            episode_id = store.put_episode(episode)
            self.print(f"Stored episode {episode_id} for {user_id}. Goodbye!")
            return EXIT_OK

        try:
            result = hybrid_retrieve(text, user_id, self.cfg.retrieval_config(), store, text_encoder, mm_encoder)
        except NoMemoriesError:
            self.print(f"I don't have any memories with {user_id} yet.")
            return EXIT_OK
        self.print(format_result(result, store))
        return EXIT_OK

    def resolve_user(self, user: str, store: MemoryStore) -> Optional[str]:
        """User id to act for, or None when identification needs the user's confirmation."""
        if USER_ID_PATTERN.match(user):
            if not store.has_user(user):
                raise UnknownUserError(user)
            return user
        decision = identify_user(name = user, face = None, store = store)
        if isinstance(decision, NeedsClarification):
            candidate = store.get_user(decision.candidate_user_id)
            self.print(f"Did you mean {candidate.display_name} ({candidate.user_id})? "
                       f"Please confirm your name.")
            return None
        if isinstance(decision, NewUser):
            self.print(f"Nice to meet you, {user}. Your profile id is {decision.user_id}.")
        return decision.user_id

    def cb_users(self, action: str = "list", user_id: Optional[str] = None) -> int:
        """List the users (without face embeddings) or delete one with all of its memories."""
        store = self.open_store()
        if action == "delete":
            if not user_id:
                raise ConfigError("users delete needs a user id")
            purged = store.delete_user(user_id)
            self.print(f"Deleted user {user_id}: {purged} records purged")
            return EXIT_OK
        if action != "list":
            raise ConfigError(f"Unknown users action {action!r}")

        self.print(f"{'user':<12}  {'name':<20}  {'scenes':>6}  {'episodes':>8}  facts")
        for profile in store.list_users():
            facts = ", ".join(f"{k}={v}" for k, v in sorted(profile.profile_facts.items()))
            self.print(f"{profile.user_id:<12}  {profile.display_name:<20}  "
                       f"{len(store.scenes_for(profile.user_id)):>6}  "
                       f"{len(store.episodes_for(profile.user_id)):>8}  {facts}")
        return EXIT_OK

    def cb_inspect(self) -> int:
        store = self.open_store()
        manifest = store.manifest()
        for key, value in manifest.to_dict().items():
            self.print(f"{key}: {value}")
        for profile in store.list_users():
            self.print(f"  {profile.user_id}: {len(store.scenes_for(profile.user_id))} scenes, "
                       f"{len(store.episodes_for(profile.user_id))} episodes")
        return EXIT_OK

    def cb_eval(self, suite: str, out_dir: Union[str, Path] = "reports",
                features: Optional[Union[str, Path]] = None, ratings: Optional[Union[str, Path]] = None,
                repeats: int = 20, workers: int = 1, items: int = 500,
                normalization: str = "zscore") -> int:
        """Run an evaluation suite and write `<suite>.txt` and `<suite>.json` to `out_dir`."""
        if suite == "memorability":
            text, document = self.eval_memorability(features, ratings, repeats, workers)
        elif suite == "retrieval":
            text, document = self.eval_retrieval(items, normalization)
        else:
            raise ConfigError(f"Unknown evaluation suite {suite!r}")
        self.out.write(text)
        for path in write_report(out_dir, suite, text, document):
            logger.info("Wrote %s", path)
        return EXIT_OK

    def eval_memorability(self, features_path, ratings_path, repeats: int, workers: int) -> Tuple[str, dict]:
        if (features_path is None) != (ratings_path is None):
            raise ConfigError("Give both --features and --ratings, or neither for a synthetic study")
        if features_path is None:
            study = make_synthetic_memorability_study(seed = self.cfg.seed,
                                                      burnin = BurninConfig(seed = self.cfg.seed, repeats = 100))
            features, ratings = study.features, study.ratings
        else:
            for path in (features_path, ratings_path):
                if not Path(path).is_file():
                    raise ConfigError(f"Input file not found: {path}")
            ratings = RatingsMatrix.from_csv(ratings_path)
            features = MemorabilityFeatures.from_csv(features_path).align(ratings.image_ids)

        cv = CvConfig(repeats = repeats, seed = self.cfg.seed, n_workers = workers)
        y = ratings.mean_ratings()
        n = len(y)

        try:
            consistency = human_consistency(ratings)
        except DegenerateInputError as e:
            logger.warning("No human consistency row: %s", e)
            consistency = None
        baselines = [evaluate_fixed_scores("random", lambda rng: baseline_random(n, rng), y, cv)]
        for interval in BASELINE_INTERVALS:
            scores = baseline_interval(n, interval)
            baselines.append(evaluate_fixed_scores(f"interval (n={interval})", lambda rng: scores, y, cv))
        configs = list(nested_cv_memorability(features, y, cv).values())

        document = {
            "images": n,
            "raters": ratings.n_raters,
            "human_consistency": None if consistency is None else consistency.to_dict(),
            "baselines": [b.to_dict() for b in baselines],
            "configs": [c.to_dict() for c in configs],
        }
        return memorability_table(consistency, baselines, configs), document

    def eval_retrieval(self, items: int, normalization: str) -> Tuple[str, dict]:
        if items < 1:
            raise ConfigError(f"items must be positive, got {items}")
        world_cfg = replace(self.cfg.world_config(), concept_count = max(2, min(items, MAX_BENCH_CONCEPTS)))
        world = SyntheticWorld(world_cfg)
        instance = make_benchmark(world, items)
        sweep = alpha_sweep(instance, world.text_encoder(), world.multimodal_encoder(),
                            normalization = normalization, epsilon = self.cfg.epsilon)
        document = dict(sweep.to_dict(), items = items, normalization = normalization, seed = self.cfg.seed)
        return retrieval_table(sweep), document

    def cb_bench(self, size: int = 10_000, dim: int = 512, queries: int = 100) -> int:
        """Time hybrid retrieval over a volatile synthetic store of `size` scenes and `size` episodes."""
        if size < 1 or dim < 1 or queries < 1:
            raise ConfigError("size, dim and queries must be positive")
        world = SyntheticWorld(replace(self.cfg.world_config(), dim = dim))
        text_encoder, mm_encoder = world.text_encoder(), world.multimodal_encoder()
        store = build_bench_store(size, dim, self.cfg.seed)
        user_id = store.list_users()[0].user_id

        latencies = []
        digest = hashlib.sha256()
        for i in range(queries):
            query = f"what did we see at the {world.concepts[i % len(world.concepts)]} {i}"
            start = time.perf_counter()
            result = hybrid_retrieve(query, user_id, self.cfg.retrieval_config(), store, text_encoder, mm_encoder)
            latencies.append(time.perf_counter() - start)
            digest.update(f"{result.episode_id}:{result.scene_id};".encode("ascii"))

        ms = 1000.0 * np.asarray(latencies)
        self.print(f"{size} scenes + {size} episodes, dim {dim}, {queries} queries")
        self.print(f"latency ms: mean {ms.mean():.3f}  std {ms.std():.3f}  p95 {np.percentile(ms, 95):.3f}")
        self.print(f"result digest: {digest.hexdigest()[:16]}")
        return EXIT_OK

def build_bench_store(size: int, dim: int, seed: int) -> MemoryStore:
    """Volatile store with one user owning `size` random scenes and episodes."""
    rng = np.random.default_rng(seed)
    store = MemoryStore(dim, dim)
    user_id = store.add_user(display_name = "bench").user_id
    decision = CaptureDecision(memorable = True, salience_e = 0.0, novelty = FIRST_SCENE,
                               triggered_by = frozenset({Trigger.FIRST_SCENE}))
    for i in range(size):
        store.put_scene(SceneMemory(user_id = user_id, timestamp = 2 * i, capture = decision,
                                    scene_embedding = Embedding(rng.standard_normal(dim)),
                                    caption = f"scene {i}",
                                    caption_embedding = Embedding(rng.standard_normal(dim))))
        store.put_episode(EpisodeMemory(user_id = user_id, timestamp = 2 * i + 1, transcript = f"episode {i}",
                                        text_embedding = Embedding(rng.standard_normal(dim))))
    return store

def format_outcome(index: int, outcome: FrameOutcome) -> str:
    decision = outcome.decision
    novelty = "first" if decision.novelty is FIRST_SCENE else f"{decision.novelty:.3f}"
    triggers = ",".join(sorted(t.value for t in decision.triggered_by)) or "-"
    status = f"stored #{outcome.memory.id}" if outcome.stored else "skipped"
    return (f"{index:5d}  {outcome.frame.user_id}  {outcome.frame.timestamp:>13d}  {status:<12}  "
            f"{triggers:<20}  e={decision.salience_e:.3f}  n={novelty}  mem={decision.mem_score:.3f}")

def format_result(result: RetrievalResult, store: MemoryStore) -> str:
    lines = [f"winner: {result.winning_modality.value}" + ("  (single pool)" if result.degraded else "")]
    if result.episode_id is not None:
        episode = store.get_episode(result.episode_id)
        lines.append(f"episode {episode.id} at {episode.timestamp}: {episode.transcript}")
        lines.append(f"  score raw {result.episode_score_raw:.4f}  norm {result.episode_score_norm:.4f}")
    if result.scene_id is not None:
        scene = store.get_scene(result.scene_id)
        lines.append(f"scene {scene.id} at {scene.timestamp}: {scene.caption or '(no caption)'}")
        lines.append(f"  score raw {result.scene_score_raw:.4f}  norm {result.scene_score_norm:.4f}")
    if result.paired_by_timestamp:
        lines.append(f"pair gap: {result.pair_gap_ms} ms")
    return "\n".join(lines)
