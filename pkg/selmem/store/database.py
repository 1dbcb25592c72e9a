"""Per-user persistent multimodal memory database.

On-disk layout of a store directory:

    manifest.json        format version, embedding dimensions, record counts
    <collection>.jsonl   append-only record log, one JSON object per line
    <collection>.vec     little-endian float32 vectors referenced by the log
                         as [byte offset, number of floats]
    images/              content-addressed image files

with one log/vector pair for each of the "users", "scenes" and "episodes"
collections. A user profile may appear several times in its log; the last
line wins. Deleting a user rewrites every file without the user's records.

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
import datetime
import hashlib
import json
import logging
import os
import shutil
import threading

from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .. import utils
from ..common import *
from ..core import Embedding, cosine_similarities
from ..type import CaptureDecision
from .records import *

logger = logging.getLogger(__name__)

SCENES   = "scenes"
EPISODES = "episodes"
USERS    = "users"

COLLECTIONS = (USERS, SCENES, EPISODES)

# Vector fields that can be searched, per collection
SEARCHABLE_FIELDS = {
    SCENES:   ("scene_embedding", "caption_embedding"),
    EPISODES: ("text_embedding",),
}

MANIFEST_FILE = "manifest.json"
IMAGES_DIR = "images"

@dataclass(frozen=True)
class Pool:
    """All records of one user in one collection, viewed through one vector field.

    Rows are in insertion order. Rows of records that lack the (optional)
    field are zero and flagged False in `present`.
    """
    ids: np.ndarray
    timestamps: np.ndarray
    matrix: np.ndarray
    present: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.size)

class MemoryStore():
    """Scenes, episodes and user profiles with exact nearest-neighbor search.

    A store is either bound to a directory (every put is appended to disk
    before it returns) or volatile (path None). Any number of readers may run
    concurrently; writers are exclusive.
    """

    def __init__(self, embedding_dim_text: int, embedding_dim_mm: int,
                 path: Optional[Union[str, Path]] = None, sync: bool = True) -> None:
        """Instantiate the class.

        Use `create` or `load` for directory-bound stores.

        Args:
            embedding_dim_text:
                Dimension of episode and caption embeddings.
            embedding_dim_mm:
                Dimension of scene (image) embeddings.
            path:
                Store directory, or None for a volatile store.
            sync:
                fsync every append.
        """
        if embedding_dim_text < 1 or embedding_dim_mm < 1:
            raise ConfigError("Embedding dimensions must be positive")
        self.embedding_dim_text = embedding_dim_text
        self.embedding_dim_mm = embedding_dim_mm
        self.path = None if path is None else Path(path)
        self.sync = sync

        self._users: Dict[str, UserProfile] = {}
        self._scenes: Dict[int, SceneMemory] = {}
        self._episodes: Dict[int, EpisodeMemory] = {}
        self._by_user: Dict[str, Dict[str, List[int]]] = {}
        self._next_id = {SCENES: 1, EPISODES: 1}
        self._pools: Dict[Tuple[str, str, str], Pool] = {}

        self._lock = utils.ReadWriteLock()
        self._user_locks: Dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._user_locks_guard = threading.Lock()

    # ------------------------------------------------------------------
    # Construction and persistence

    @classmethod
    def create(cls, path: Union[str, Path], embedding_dim_text: int, embedding_dim_mm: int,
               sync: bool = True) -> "MemoryStore":
        """Create an empty store in a new (or empty) directory."""
        path = Path(path)
        if path.exists() and any(path.iterdir()):
            raise StorageError(f"Refusing to create a store in non-empty directory {path}")
        store = cls(embedding_dim_text, embedding_dim_mm, path = path, sync = sync)
        try:
            path.mkdir(parents = True, exist_ok = True)
            store._write_snapshot(path)
        except OSError as e:
            raise StorageError(f"Unable to create store at {path}: {e}") from e
        logger.info("Created store at %s (text dim %d, mm dim %d)", path, embedding_dim_text, embedding_dim_mm)
        return store

    @classmethod
    def open(cls, path: Union[str, Path], embedding_dim_text: int, embedding_dim_mm: int,
             sync: bool = True) -> "MemoryStore":
        """Load the store at `path`, creating it if the directory holds no store."""
        if (Path(path) / MANIFEST_FILE).is_file():
            store = cls.load(path, sync = sync)
            if (store.embedding_dim_text, store.embedding_dim_mm) != (embedding_dim_text, embedding_dim_mm):
                raise DimensionError(f"Store at {path} has dimensions "
                                     f"({store.embedding_dim_text}, {store.embedding_dim_mm}), "
                                     f"expected ({embedding_dim_text}, {embedding_dim_mm})")
            return store
        return cls.create(path, embedding_dim_text, embedding_dim_mm, sync = sync)

    @classmethod
    def load(cls, path: Union[str, Path], sync: bool = True) -> "MemoryStore":
        """Load a store directory written by `create`/`save`.

        The returned store is bound to `path`. Nothing is returned unless the
        whole directory could be read.

        Raises:
            StorageError: The directory or manifest is missing or unreadable.
            FormatVersionError: The store was written by another format version.
            CorruptStoreError: A log line or vector reference is damaged.
        """
        path = Path(path)
        try:
            manifest = StoreManifest.from_dict(json.loads((path / MANIFEST_FILE).read_text(encoding = "utf-8")))
        except FileNotFoundError as e:
            raise StorageError(f"No store at {path}") from e
        except (ValueError, KeyError, TypeError) as e:
            raise CorruptStoreError(f"Damaged manifest in {path}: {e}") from e
        if manifest.format_version != FORMAT_VERSION:
            raise FormatVersionError(f"Store at {path} has format version {manifest.format_version}, "
                                     f"expected {FORMAT_VERSION}")

        store = cls(manifest.embedding_dim_text, manifest.embedding_dim_mm, path = path, sync = sync)
        for collection in COLLECTIONS:
            for line_no, entry, vectors in store._read_collection(path, collection):
                try:
                    store._restore(collection, entry, vectors)
                except (KeyError, TypeError, ValueError) as e:
                    raise CorruptStoreError(f"{path / (collection + '.jsonl')}:{line_no}: {e}") from e

        logger.info("Loaded store %s: %d users, %d scenes, %d episodes",
                    path, len(store._users), len(store._scenes), len(store._episodes))
        return store

    def save(self, path: Union[str, Path]) -> None:
        """Write a complete, compacted snapshot of the store to `path`.

        Saving to the store's own directory compacts it in place.
        """
        path = Path(path)
        with self._lock.read():
            try:
                path.mkdir(parents = True, exist_ok = True)
                self._write_snapshot(path)
                if self.path is not None and path.resolve() != self.path.resolve():
                    self._copy_images(path)
            except OSError as e:
                raise StorageError(f"Unable to save store to {path}: {e}") from e
        logger.info("Saved store snapshot to %s", path)

    def manifest(self) -> StoreManifest:
        with self._lock.read():
            return self._manifest()

    def _manifest(self) -> StoreManifest:
        return StoreManifest(
            format_version = FORMAT_VERSION,
            embedding_dim_text = self.embedding_dim_text,
            embedding_dim_mm = self.embedding_dim_mm,
            user_count = len(self._users),
            scene_count = len(self._scenes),
            episode_count = len(self._episodes),
        )

    # ------------------------------------------------------------------
    # Writers

    def put_user(self, profile: UserProfile) -> str:
        """Insert a profile, or replace the profile with the same user id."""
        with self._lock.write():
            is_new = profile.user_id not in self._users
            self._put_user(profile)
        logger.info("%s user %s", "Added" if is_new else "Updated", profile.user_id)
        return profile.user_id

    def add_user(self, display_name: str = "", face_embedding: Optional[Embedding] = None,
                 day: Optional[datetime.date] = None) -> UserProfile:
        """Create a profile under the next free date-serial id of `day`."""
        with self._lock.write():
            profile = UserProfile(user_id = self._next_user_id(day), display_name = display_name,
                                  face_embedding = face_embedding)
            self._put_user(profile)
        logger.info("Added user %s", profile.user_id)
        return profile

    def update_user(self, user_id: str, display_name: Optional[str] = None,
                    face_embedding: Optional[Embedding] = None,
                    profile_facts: Optional[Dict[str, str]] = None) -> UserProfile:
        """Change fields of an existing profile. New profile facts are merged into the old ones."""
        with self._lock.write():
            self._check_user(user_id)
            profile = self._users[user_id]
            facts = dict(profile.profile_facts)
            facts.update(profile_facts or {})
            updated = replace(
                profile,
                display_name = profile.display_name if display_name is None else display_name,
                face_embedding = profile.face_embedding if face_embedding is None else face_embedding,
                profile_facts = facts,
            )
            self._put_user(updated)
        logger.info("Updated user %s", user_id)
        return updated

    def _put_user(self, profile: UserProfile) -> None:
        if profile.face_embedding is not None:
            for other in self._users.values():
                if other.face_embedding is not None and other.user_id != profile.user_id \
                        and other.face_embedding.dim != profile.face_embedding.dim:
                    raise DimensionError("Face embeddings of all users must share one dimension")
        previous = self._users.get(profile.user_id)

        def apply() -> None:
            self._users[profile.user_id] = profile
            self._by_user.setdefault(profile.user_id, {SCENES: [], EPISODES: []})

        def undo() -> None:
            if previous is not None:
                self._users[profile.user_id] = previous
            else:
                self._users.pop(profile.user_id, None)
                self._by_user.pop(profile.user_id, None)

        self._persist(USERS, _user_to_dict(profile), {"face_embedding": profile.face_embedding}, apply, undo)

    def put_scene(self, memory: SceneMemory) -> int:
        """Persist a scene and return its store-assigned id.

        Raises:
            UnknownUserError: The scene's user is not in the store.
            DimensionError: An embedding doesn't match the store dimensions.
            StorageError: The record could not be written; nothing is stored.
        """
        self._check_dim(memory.scene_embedding, self.embedding_dim_mm, "scene_embedding")
        if memory.caption_embedding is not None:
            self._check_dim(memory.caption_embedding, self.embedding_dim_text, "caption_embedding")
        with self._lock.write():
            self._check_user(memory.user_id)
            memory = replace(memory, id = self._next_id[SCENES])
            self._persist(SCENES, _scene_to_dict(memory), {
                "scene_embedding": memory.scene_embedding,
                "caption_embedding": memory.caption_embedding,
            }, lambda: self._insert(SCENES, memory), lambda: self._uninsert(SCENES, memory))
        logger.debug("Stored scene %d for user %s", memory.id, memory.user_id)
        return memory.id

    def put_episode(self, memory: EpisodeMemory) -> int:
        """Persist an episode and return its store-assigned id."""
        self._check_dim(memory.text_embedding, self.embedding_dim_text, "text_embedding")
        with self._lock.write():
            self._check_user(memory.user_id)
            memory = replace(memory, id = self._next_id[EPISODES])
            self._persist(EPISODES, _episode_to_dict(memory), {"text_embedding": memory.text_embedding},
                          lambda: self._insert(EPISODES, memory), lambda: self._uninsert(EPISODES, memory))
        logger.debug("Stored episode %d for user %s", memory.id, memory.user_id)
        return memory.id

    def put_image(self, data: bytes, suffix: str = "") -> str:
        """Store raw image bytes by content address and return the reference.

        Only directory-bound stores hold images.
        """
        if self.path is None:
            raise StorageError("A volatile store cannot hold image files")
        ref = f"{IMAGES_DIR}/{hashlib.sha256(data).hexdigest()}{suffix}"
        target = self.path / ref
        with self._lock.write():
            try:
                target.parent.mkdir(exist_ok = True)
                if not target.exists():
                    target.write_bytes(data)
            except OSError as e:
                raise StorageError(f"Unable to write image {target}: {e}") from e
        return ref

    def delete_user(self, user_id: str) -> int:
        """Permanently remove a user, the user's memories and image files.

        Returns:
            Number of purged records (profile + scenes + episodes).

        Raises:
            UnknownUserError: No such user.
            StorageError: The store directory could not be rewritten; the user
                is still stored. Also raised when image files are left behind,
                after the records are gone.
        """
        with self._lock.write():
            self._check_user(user_id)
            if self.path is not None:
                try:
                    self._write_snapshot(self.path, exclude_user = user_id)
                except OSError as e:
                    raise StorageError(f"Unable to purge user {user_id} from {self.path}: {e}") from e

            owned = self._by_user.pop(user_id)
            scenes = [self._scenes.pop(i) for i in owned[SCENES]]
            for i in owned[EPISODES]:
                del self._episodes[i]
            del self._users[user_id]
            self._invalidate(user_id)
            purged = 1 + len(owned[SCENES]) + len(owned[EPISODES])

            if self.path is not None:
                try:
                    self._remove_images(scenes)
                except OSError as e:
                    raise StorageError(f"Unable to remove images of user {user_id} from {self.path}: {e}") from e

        with self._user_locks_guard:
            self._user_locks.pop(user_id, None)
        logger.info("Purged user %s (%d records)", user_id, purged)
        return purged

    # ------------------------------------------------------------------
    # Readers

    def get_user(self, user_id: str) -> UserProfile:
        with self._lock.read():
            self._check_user(user_id)
            return self._users[user_id]

    def has_user(self, user_id: str) -> bool:
        with self._lock.read():
            return user_id in self._users

    def list_users(self) -> List[UserProfile]:
        """All profiles, ordered by user id."""
        with self._lock.read():
            return [self._users[k] for k in sorted(self._users)]

    def get_scene(self, scene_id: int) -> SceneMemory:
        with self._lock.read():
            try:
                return self._scenes[scene_id]
            except KeyError:
                raise UnknownRefError(f"No scene with id {scene_id}") from None

    def get_episode(self, episode_id: int) -> EpisodeMemory:
        with self._lock.read():
            try:
                return self._episodes[episode_id]
            except KeyError:
                raise UnknownRefError(f"No episode with id {episode_id}") from None

    def scenes_for(self, user_id: str) -> List[SceneMemory]:
        """The user's scenes in insertion order."""
        with self._lock.read():
            self._check_user(user_id)
            return [self._scenes[i] for i in self._by_user[user_id][SCENES]]

    def episodes_for(self, user_id: str) -> List[EpisodeMemory]:
        """The user's episodes in insertion order."""
        with self._lock.read():
            self._check_user(user_id)
            return [self._episodes[i] for i in self._by_user[user_id][EPISODES]]

    def pool(self, collection: str, user_id: str, field: str) -> Pool:
        """Vectors of one field of all the user's records in a collection.

        Raises:
            SchemaError: The collection has no such searchable field.
            UnknownUserError: No such user.
        """
        return self.pools(collection, user_id, field)[0]

    def pools(self, collection: str, user_id: str, *fields: str) -> Tuple[Pool, ...]:
        """Several `pool` views taken from one consistent state of the store."""
        for field in fields:
            if field not in SEARCHABLE_FIELDS.get(collection, ()):
                raise SchemaError(f"Collection {collection!r} has no searchable field {field!r}")
        with self._lock.read():
            self._check_user(user_id)
            result = []
            for field in fields:
                key = (collection, user_id, field)
                pool = self._pools.get(key)
                if pool is None:
                    pool = self._pools[key] = self._build_pool(collection, user_id, field)
                result.append(pool)
            return tuple(result)

    def nearest(self, query: Embedding, collection: str, user_id: str, field: str,
                limit: int) -> List[Tuple[int, float]]:
        """Exact cosine nearest neighbors of `query` among the user's records.

        Records lacking the field are skipped. Ties are broken by ascending
        timestamp, then ascending id.

        Returns:
            Up to `limit` (id, similarity) pairs, most similar first.
        """
        if limit < 1:
            raise ConfigError(f"limit must be positive, got {limit}")
        pool = self.pool(collection, user_id, field)
        expected = self.embedding_dim_mm if field == "scene_embedding" else self.embedding_dim_text
        self._check_dim(query, expected, field)

        ids = pool.ids[pool.present]
        timestamps = pool.timestamps[pool.present]
        sims = cosine_similarities(query, pool.matrix[pool.present])
        order = np.lexsort((ids, timestamps, -sims))[:limit]
        return [(int(ids[i]), float(sims[i])) for i in order]

    def user_lock(self, user_id: str) -> threading.Lock:
        """Lock serializing read-modify-write sequences of one user (e.g. capture)."""
        with self._user_locks_guard:
            return self._user_locks[user_id]

    def next_user_id(self, day: Optional[datetime.date] = None) -> str:
        """Next free date-serial user id for `day` (UTC today by default)."""
        with self._lock.read():
            return self._next_user_id(day)

    def _next_user_id(self, day: Optional[datetime.date]) -> str:
        if day is None:
            day = datetime.datetime.now(datetime.timezone.utc).date()
        prefix = day.strftime("%y%m%d")
        serials = [int(u[7:]) for u in self._users if u.startswith(prefix + "_")]
        serial = max(serials, default = 0) + 1
        if serial > 9999:
            raise StorageError(f"No free user id left for {day}")
        return f"{prefix}_{serial:04d}"

    # ------------------------------------------------------------------
    # Internals

    def _check_user(self, user_id: str) -> None:
        if user_id not in self._users:
            raise UnknownUserError(f"Unknown user {user_id!r}")

    @staticmethod
    def _check_dim(embedding: Embedding, expected: int, what: str) -> None:
        if embedding.dim != expected:
            raise DimensionError(f"{what} has dimension {embedding.dim}, store expects {expected}")

    def _insert(self, collection: str, memory) -> None:
        table = self._scenes if collection == SCENES else self._episodes
        table[memory.id] = memory
        self._by_user[memory.user_id][collection].append(memory.id)
        self._next_id[collection] = max(self._next_id[collection], memory.id + 1)
        self._invalidate(memory.user_id)

    def _uninsert(self, collection: str, memory) -> None:
        table = self._scenes if collection == SCENES else self._episodes
        if table.pop(memory.id, None) is None:
            return
        self._by_user[memory.user_id][collection].remove(memory.id)
        self._next_id[collection] = memory.id
        self._invalidate(memory.user_id)

    def _invalidate(self, user_id: str) -> None:
        for key in [k for k in self._pools if k[1] == user_id]:
            del self._pools[key]

    def _build_pool(self, collection: str, user_id: str, field: str) -> Pool:
        table = self._scenes if collection == SCENES else self._episodes
        records = [table[i] for i in self._by_user[user_id][collection]]
        dim = self.embedding_dim_mm if field == "scene_embedding" else self.embedding_dim_text
        matrix = np.zeros((len(records), dim), dtype = np.float64)
        present = np.zeros(len(records), dtype = bool)
        for row, record in enumerate(records):
            embedding = getattr(record, field)
            if embedding is not None:
                matrix[row] = embedding.values
                present[row] = True
        pool = Pool(
            ids = np.array([r.id for r in records], dtype = np.int64),
            timestamps = np.array([r.timestamp for r in records], dtype = np.int64),
            matrix = matrix,
            present = present,
        )
        for array in (pool.ids, pool.timestamps, pool.matrix, pool.present):
            array.setflags(write = False)
        return pool

    def _persist(self, collection: str, entry: dict, vectors: Dict[str, Optional[Embedding]],
                 apply: Callable[[], None], undo: Callable[[], None]) -> None:
        """Append a record to disk and apply it in memory, or leave both unchanged."""
        sizes = self._log_sizes(collection)
        applied = False
        try:
            self._append(collection, entry, vectors)
            apply()
            applied = True
            self._write_manifest()
        except StorageError:
            if applied:
                undo()
            self._truncate_logs(collection, sizes)
            raise

    def _log_sizes(self, collection: str) -> Optional[Tuple[int, int]]:
        if self.path is None:
            return None
        try:
            return tuple(os.path.getsize(self.path / f"{collection}{ext}") for ext in (".vec", ".jsonl"))
        except OSError as e:
            raise StorageError(f"Unable to read {collection} logs in {self.path}: {e}") from e

    def _truncate_logs(self, collection: str, sizes: Optional[Tuple[int, int]]) -> None:
        if sizes is None:
            return
        for ext, size in zip((".vec", ".jsonl"), sizes):
            try:
                os.truncate(self.path / f"{collection}{ext}", size)
            except OSError as e:
                logger.error("Unable to roll back %s%s in %s: %s", collection, ext, self.path, e)

    def _append(self, collection: str, entry: dict, vectors: Dict[str, Optional[Embedding]]) -> None:
        """Append one record (vectors first, then the log line) to the store directory."""
        if self.path is None:
            return
        try:
            with open(self.path / f"{collection}.vec", "ab") as f:
                offset = f.seek(0, os.SEEK_END)
                refs = {}
                for name, embedding in vectors.items():
                    if embedding is None:
                        refs[name] = None
                        continue
                    refs[name] = [offset, embedding.dim]
                    f.write(embedding.to_bytes())
                    offset += 4 * embedding.dim
                self._flush(f)
            entry = dict(entry, vectors = refs)
            with open(self.path / f"{collection}.jsonl", "a", encoding = "utf-8") as f:
                f.write(json.dumps(entry, ensure_ascii = False) + "\n")
                self._flush(f)
        except OSError as e:
            raise StorageError(f"Unable to append to {collection} in {self.path}: {e}") from e

    def _flush(self, f) -> None:
        f.flush()
        if self.sync:
            os.fsync(f.fileno())

    def _write_manifest(self) -> None:
        if self.path is None:
            return
        try:
            _atomic_write(self.path / MANIFEST_FILE, json.dumps(self._manifest().to_dict(), indent = 2).encode("utf-8"))
        except OSError as e:
            raise StorageError(f"Unable to write manifest in {self.path}: {e}") from e

    def _write_snapshot(self, path: Path, exclude_user: Optional[str] = None) -> None:
        """Write every collection (compacted) and the manifest to `path`.

        Records of `exclude_user` are left out. All files are staged before
        the first one replaces its predecessor.
        """
        users = [self._users[k] for k in sorted(self._users) if k != exclude_user]
        scenes = [s for s in self._scenes.values() if s.user_id != exclude_user]
        episodes = [e for e in self._episodes.values() if e.user_id != exclude_user]
        snapshot = {
            USERS:    [(_user_to_dict(u), {"face_embedding": u.face_embedding}) for u in users],
            SCENES:   [(_scene_to_dict(s), {"scene_embedding": s.scene_embedding,
                                            "caption_embedding": s.caption_embedding})
                       for s in scenes],
            EPISODES: [(_episode_to_dict(e), {"text_embedding": e.text_embedding}) for e in episodes],
        }
        manifest = replace(self._manifest(), user_count = len(users), scene_count = len(scenes),
                           episode_count = len(episodes))
        staged = []
        for collection, items in snapshot.items():
            blob = bytearray()
            lines = []
            for entry, vectors in items:
                refs = {}
                for name, embedding in vectors.items():
                    if embedding is None:
                        refs[name] = None
                        continue
                    refs[name] = [len(blob), embedding.dim]
                    blob += embedding.to_bytes()
                lines.append(json.dumps(dict(entry, vectors = refs), ensure_ascii = False) + "\n")
            staged.append(_stage(path / f"{collection}.vec", bytes(blob)))
            staged.append(_stage(path / f"{collection}.jsonl", "".join(lines).encode("utf-8")))
        staged.append(_stage(path / MANIFEST_FILE, json.dumps(manifest.to_dict(), indent = 2).encode("utf-8")))
        for tmp, target in staged:
            os.replace(tmp, target)

    def _read_collection(self, path: Path, collection: str):
        """Yield (line number, entry, {field: Embedding or None}) for a collection log."""
        log_path = path / f"{collection}.jsonl"
        vec_path = path / f"{collection}.vec"
        if not log_path.is_file():
            raise CorruptStoreError(f"Missing record log {log_path}")
        vec_data = b""
        if vec_path.is_file() and vec_path.stat().st_size > 0:
            mapped = utils.memory_map(str(vec_path))
            try:
                vec_data = bytes(mapped)
            finally:
                mapped.close()

        with open(log_path, encoding = "utf-8") as f:
            for line_no, line in enumerate(f, start = 1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    refs = entry.pop("vectors")
                except (ValueError, KeyError, AttributeError) as e:
                    raise CorruptStoreError(f"{log_path}:{line_no}: unreadable record ({e})") from e
                vectors = {}
                try:
                    refs = [(str(name), None if ref is None else (int(ref[0]), int(ref[1])))
                            for name, ref in refs.items()]
                except (TypeError, ValueError, AttributeError, IndexError, KeyError) as e:
                    raise CorruptStoreError(f"{log_path}:{line_no}: malformed vector reference ({e})") from e
                for name, ref in refs:
                    if ref is None:
                        vectors[name] = None
                        continue
                    offset, length = ref
                    end = offset + 4 * length
                    if offset < 0 or length < 1 or offset % 4 or end > len(vec_data):
                        raise CorruptStoreError(f"{log_path}:{line_no}: vector {name} at [{offset}, {length}] "
                                                f"is outside {vec_path} ({len(vec_data)} bytes)")
                    try:
                        vectors[name] = Embedding.from_bytes(vec_data[offset:end])
                    except SelMemException as e:
                        raise CorruptStoreError(f"{log_path}:{line_no}: vector {name}: {e}") from e
                yield line_no, entry, vectors

    def _restore(self, collection: str, entry: dict, vectors: dict) -> None:
        """Rebuild an in-memory record from a log entry (no disk writes)."""
        if collection == USERS:
            profile = UserProfile(
                user_id = entry["user_id"],
                display_name = entry.get("display_name", ""),
                face_embedding = vectors.get("face_embedding"),
                profile_facts = entry.get("profile_facts", {}),
            )
            self._users[profile.user_id] = profile
            self._by_user.setdefault(profile.user_id, {SCENES: [], EPISODES: []})
            return

        if collection == SCENES:
            memory = SceneMemory(
                id = int(entry["id"]),
                user_id = entry["user_id"],
                timestamp = int(entry["timestamp"]),
                scene_embedding = vectors["scene_embedding"],
                caption = entry.get("caption", ""),
                caption_embedding = vectors.get("caption_embedding"),
                image_ref = entry.get("image_ref"),
                capture = CaptureDecision.from_dict(entry["capture"]),
            )
            self._check_dim(memory.scene_embedding, self.embedding_dim_mm, "scene_embedding")
            if memory.caption_embedding is not None:
                self._check_dim(memory.caption_embedding, self.embedding_dim_text, "caption_embedding")
            table = self._scenes
        else:
            memory = EpisodeMemory(
                id = int(entry["id"]),
                user_id = entry["user_id"],
                timestamp = int(entry["timestamp"]),
                transcript = entry["transcript"],
                text_embedding = vectors["text_embedding"],
            )
            self._check_dim(memory.text_embedding, self.embedding_dim_text, "text_embedding")
            table = self._episodes

        if memory.id in table:
            raise ValueError(f"duplicate id {memory.id}")
        if memory.user_id not in self._users:
            raise ValueError(f"record {memory.id} belongs to unknown user {memory.user_id}")
        self._insert(collection, memory)

    def _image_path(self, ref: Optional[str]) -> Optional[Path]:
        """Path of a store-held image, or None if `ref` points elsewhere."""
        if self.path is None or not ref or not ref.startswith(IMAGES_DIR + "/"):
            return None
        return self.path / ref

    def _remove_images(self, scenes: List[SceneMemory]) -> None:
        still_used = {s.image_ref for s in self._scenes.values()}
        for scene in scenes:
            image = self._image_path(scene.image_ref)
            if image is not None and scene.image_ref not in still_used and image.exists():
                image.unlink()

    def _copy_images(self, path: Path) -> None:
        for scene in self._scenes.values():
            image = self._image_path(scene.image_ref)
            if image is not None and image.exists():
                (path / IMAGES_DIR).mkdir(exist_ok = True)
                shutil.copy2(image, path / scene.image_ref)

def _stage(path: Path, data: bytes) -> Tuple[Path, Path]:
    """Write `data` next to `path` and return (temporary file, final path)."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    return tmp, path

def _atomic_write(path: Path, data: bytes) -> None:
    os.replace(*_stage(path, data))

def _user_to_dict(profile: UserProfile) -> dict:
    return {
        "user_id": profile.user_id,
        "display_name": profile.display_name,
        "profile_facts": dict(profile.profile_facts),
    }

def _scene_to_dict(memory: SceneMemory) -> dict:
    return {
        "id": memory.id,
        "user_id": memory.user_id,
        "timestamp": memory.timestamp,
        "caption": memory.caption,
        "image_ref": memory.image_ref,
        "capture": memory.capture.to_dict(),
    }

def _episode_to_dict(memory: EpisodeMemory) -> dict:
    return {
        "id": memory.id,
        "user_id": memory.user_id,
        "timestamp": memory.timestamp,
        "transcript": memory.transcript,
    }
