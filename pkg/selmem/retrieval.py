"""Hybrid episode/scene retrieval.

The query is embedded by the text encoder (compared with episode transcripts
and scene captions) and by the multimodal encoder (compared with scene
images). Scene similarity mixes the image and caption similarities with
weight alpha. Each pool is z-score normalized on its own, the better of the
two pool winners is returned, and the other modality contributes the record
closest in time to the winner.

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

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from .common import *
from .config import RetrievalConfig
from .core import cosine_similarities, zscore_normalize
from .store import EPISODES, SCENES, MemoryStore

logger = logging.getLogger(__name__)

def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")

def scene_similarity(s_img: float, s_desc: float, alpha: float) -> float:
    """alpha * s_img + (1 - alpha) * s_desc."""
    _check_alpha(alpha)
    return alpha * s_img + (1.0 - alpha) * s_desc

def fuse_scores(sim_img_norm, sim_text_norm, alpha: float):
    """Late fusion of normalized image and text scores. Works on scalars and arrays."""
    _check_alpha(alpha)
    return alpha * sim_img_norm + (1.0 - alpha) * sim_text_norm

@dataclass(frozen=True)
class RetrievalResult:
    """The retrieved episode/scene pair.

    The `*_raw`/`*_norm` scores belong to the best record of each pool. The
    record of the losing modality is the one closest in time to the winner,
    so its id can differ from the pool's best record.
    """
    episode_id: Optional[int]
    scene_id: Optional[int]
    winning_modality: Modality
    episode_score_raw: Optional[float] = None
    episode_score_norm: Optional[float] = None
    scene_score_raw: Optional[float] = None
    scene_score_norm: Optional[float] = None
    best_episode_id: Optional[int] = None
    best_scene_id: Optional[int] = None
    paired_by_timestamp: bool = False
    pair_gap_ms: Optional[int] = None
    degraded: bool = False

    def to_dict(self) -> dict:
        result = asdict(self)
        result["winning_modality"] = self.winning_modality.value
        return result

def _argmax(scores: np.ndarray, timestamps: np.ndarray, ids: np.ndarray) -> int:
    """Index of the highest score; ties go to the earliest, then lowest-id record."""
    tied = np.flatnonzero(scores == scores.max())
    return int(tied[np.lexsort((ids[tied], timestamps[tied]))[0]])

def _nearest_in_time(t: int, timestamps: np.ndarray, ids: np.ndarray) -> int:
    """Index of the record closest in time to `t`; ties go to the earlier, then lower-id record."""
    gaps = np.abs(timestamps - t)
    return int(np.lexsort((ids, timestamps, gaps))[0])

def select_pair(episodes: Tuple[np.ndarray, np.ndarray, np.ndarray],
                scenes: Tuple[np.ndarray, np.ndarray, np.ndarray],
                epsilon: float) -> RetrievalResult:
    """Choose the episode/scene pair from per-pool raw similarities.

    Args:
        episodes:
            (ids, timestamps, raw similarities) of the episode pool.
        scenes:
            (ids, timestamps, raw scene similarities) of the scene pool.
        epsilon:
            z-score epsilon.

    Raises:
        NoMemoriesError: Both pools are empty.
    """
    ep_ids, ep_ts, ep_raw = episodes
    sc_ids, sc_ts, sc_raw = scenes
    if ep_ids.size == 0 and sc_ids.size == 0:
        raise NoMemoriesError("No memories stored")

    if sc_ids.size == 0:
        ep_norm = zscore_normalize(ep_raw, epsilon)
        i = _argmax(ep_norm, ep_ts, ep_ids)
        return RetrievalResult(
            episode_id = int(ep_ids[i]), scene_id = None, winning_modality = Modality.EPISODE,
            episode_score_raw = float(ep_raw[i]), episode_score_norm = float(ep_norm[i]),
            best_episode_id = int(ep_ids[i]), degraded = True,
        )
    if ep_ids.size == 0:
        sc_norm = zscore_normalize(sc_raw, epsilon)
        j = _argmax(sc_norm, sc_ts, sc_ids)
        return RetrievalResult(
            episode_id = None, scene_id = int(sc_ids[j]), winning_modality = Modality.SCENE,
            scene_score_raw = float(sc_raw[j]), scene_score_norm = float(sc_norm[j]),
            best_scene_id = int(sc_ids[j]), degraded = True,
        )

    ep_norm = zscore_normalize(ep_raw, epsilon)
    sc_norm = zscore_normalize(sc_raw, epsilon)
    i = _argmax(ep_norm, ep_ts, ep_ids)
    j = _argmax(sc_norm, sc_ts, sc_ids)

    # Singleton or constant pools both normalize to 0; the episode takes that tie
    episode_wins = ep_norm[i] > sc_norm[j] or (ep_norm[i] == 0.0 and sc_norm[j] == 0.0)
    if episode_wins:
        t_star = int(ep_ts[i])
        k = _nearest_in_time(t_star, sc_ts, sc_ids)
        episode_id, scene_id = int(ep_ids[i]), int(sc_ids[k])
        gap = abs(int(sc_ts[k]) - t_star)
    else:
        t_star = int(sc_ts[j])
        k = _nearest_in_time(t_star, ep_ts, ep_ids)
        episode_id, scene_id = int(ep_ids[k]), int(sc_ids[j])
        gap = abs(int(ep_ts[k]) - t_star)

    return RetrievalResult(
        episode_id = episode_id,
        scene_id = scene_id,
        winning_modality = Modality.EPISODE if episode_wins else Modality.SCENE,
        episode_score_raw = float(ep_raw[i]),
        episode_score_norm = float(ep_norm[i]),
        scene_score_raw = float(sc_raw[j]),
        scene_score_norm = float(sc_norm[j]),
        best_episode_id = int(ep_ids[i]),
        best_scene_id = int(sc_ids[j]),
        paired_by_timestamp = True,
        pair_gap_ms = gap,
    )

def hybrid_retrieve(query: str, user_id: str, cfg: RetrievalConfig, store: MemoryStore,
                    text_encoder, mm_encoder) -> RetrievalResult:
    """Retrieve the episode/scene pair of one user that best matches `query`.

    Scenes without a caption embedding get the lowest caption similarity of
    the captioned scenes (0 when none is captioned).

    Raises:
        UnknownUserError: No such user.
        NoMemoriesError: The user has neither episodes nor scenes.
    """
    episodes = store.pool(EPISODES, user_id, "text_embedding")
    images, captions = store.pools(SCENES, user_id, "scene_embedding", "caption_embedding")
    if len(episodes) == 0 and len(images) == 0:
        raise NoMemoriesError(f"User {user_id} has no memories")

    v_text = text_encoder.encode_text([query])[0]
    v_mm = mm_encoder.encode_query_multimodal(query)

    s_episode = cosine_similarities(v_text, episodes.matrix)
    s_img = cosine_similarities(v_mm, images.matrix)
    s_desc = np.zeros(len(captions), dtype = np.float64)
    if captions.present.any():
        s_desc[captions.present] = cosine_similarities(v_text, captions.matrix[captions.present])
        s_desc[~captions.present] = s_desc[captions.present].min()
    s_scene = fuse_scores(s_img, s_desc, cfg.alpha)

    result = select_pair((episodes.ids, episodes.timestamps, s_episode),
                         (images.ids, images.timestamps, s_scene), cfg.epsilon)
    logger.debug("Query %r for %s: %s wins (episode %s, scene %s)", query, user_id,
                 result.winning_modality.value, result.episode_id, result.scene_id)
    return result
