import datetime
import json

import numpy as np
import pytest

from selmem.common import *
from selmem.core import cosine_similarity
from selmem.identity import NewUser, identify_user
from selmem.store import (
    EPISODES,
    FORMAT_VERSION,
    SCENES,
    EpisodeMemory,
    MemoryStore,
    SceneMemory,
    UserProfile,
    check_user_id,
)
from selmem.type import FIRST_SCENE, CaptureDecision, Trigger

from .conftest import OTHER_USER, USER, emb, random_embedding

DECISION = CaptureDecision(memorable = True, salience_e = 0.25, novelty = FIRST_SCENE, mem_score = 0.625,
                           triggered_by = frozenset({Trigger.FIRST_SCENE, Trigger.EMOTION}))

def scene(rng, user = USER, timestamp = 0, dim = 4, caption = True, image_ref = None):
    return SceneMemory(user_id = user, timestamp = timestamp, scene_embedding = random_embedding(rng, dim),
                       capture = DECISION, caption = "caption" if caption else "",
                       caption_embedding = random_embedding(rng, dim) if caption else None,
                       image_ref = image_ref)

def episode(rng, user = USER, timestamp = 0, dim = 4):
    return EpisodeMemory(user_id = user, timestamp = timestamp, transcript = f"we talked at {timestamp}",
                         text_embedding = random_embedding(rng, dim))

def fill(memory, rng, scenes = 3, episodes = 2, user = USER):
    for t in range(scenes):
        memory.put_scene(scene(rng, user = user, timestamp = 10 * t, caption = t % 2 == 0))
    for t in range(episodes):
        memory.put_episode(episode(rng, user = user, timestamp = 10 * t + 5))

class TestRecords:
    def test_put_then_get(self, store):
        rng = np.random.default_rng(0)
        memory = scene(rng)
        scene_id = store.put_scene(memory)
        assert store.get_scene(scene_id) == SceneMemory(**{**memory.__dict__, "id": scene_id})

    def test_ids_are_store_assigned(self, store):
        rng = np.random.default_rng(0)
        memory = scene(rng)
        assert store.put_scene(memory) != store.put_scene(memory)
        e = episode(rng)
        assert store.put_episode(e) != store.put_episode(e)

    def test_unknown_user(self, store):
        with pytest.raises(UnknownUserError):
            store.put_scene(scene(np.random.default_rng(0), user = OTHER_USER))
        with pytest.raises(UnknownUserError):
            store.scenes_for(OTHER_USER)

    def test_dimension_checks(self, store):
        rng = np.random.default_rng(0)
        with pytest.raises(DimensionError):
            store.put_scene(scene(rng, dim = 5))
        with pytest.raises(DimensionError):
            store.put_episode(episode(rng, dim = 3))

    def test_unknown_ids(self, store):
        with pytest.raises(UnknownRefError):
            store.get_scene(42)
        with pytest.raises(UnknownRefError):
            store.get_episode(42)

    def test_pool_views_are_read_only(self, store):
        fill(store, np.random.default_rng(1))
        pool = store.pool(SCENES, USER, "caption_embedding")
        assert list(pool.present) == [True, False, True]
        with pytest.raises(ValueError):
            pool.matrix[0, 0] = 1.0
        with pytest.raises(SchemaError):
            store.pool(SCENES, USER, "text_embedding")

class TestNearest:
    def test_singleton(self, store):
        memory = scene(np.random.default_rng(2))
        scene_id = store.put_scene(memory)
        query = emb(1, 2, 3, 4)
        [(found, similarity)] = store.nearest(query, SCENES, USER, "scene_embedding", 5)
        assert found == scene_id
        assert similarity == pytest.approx(cosine_similarity(query, memory.scene_embedding), abs = 1e-12)

    def test_self_match(self, store):
        rng = np.random.default_rng(3)
        fill(store, rng, scenes = 6)
        target = store.scenes_for(USER)[4]
        found, similarity = store.nearest(target.scene_embedding, SCENES, USER, "scene_embedding", 3)[0]
        assert found == target.id
        assert similarity == pytest.approx(1.0, abs = 1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, store, seed):
        rng = np.random.default_rng(seed)
        fill(store, rng, scenes = 20, episodes = 0)
        for _ in range(20):
            query = random_embedding(rng, 4)
            oracle = sorted(((-cosine_similarity(query, s.scene_embedding), s.timestamp, s.id)
                             for s in store.scenes_for(USER)))
            result = store.nearest(query, SCENES, USER, "scene_embedding", 7)
            assert [i for i, _ in result] == [i for _, _, i in oracle[:7]]

    def test_skips_missing_captions(self, store):
        fill(store, np.random.default_rng(4), scenes = 4)
        result = store.nearest(emb(1, 0, 0, 0), SCENES, USER, "caption_embedding", 10)
        assert len(result) == 2

    def test_limit(self, store):
        with pytest.raises(ConfigError):
            store.nearest(emb(1, 0, 0, 0), SCENES, USER, "scene_embedding", 0)

    def test_query_dimension(self, store):
        with pytest.raises(DimensionError):
            store.nearest(emb(1, 0), EPISODES, USER, "text_embedding", 1)

class TestUsers:
    def test_ids(self):
        assert check_user_id("251008_0001") == "251008_0001"
        for bad in ("alice", "251008-0001", "2510080001", 251008):
            with pytest.raises(SchemaError):
                check_user_id(bad)

    def test_add_user_serials(self):
        memory = MemoryStore(4, 4)
        day = datetime.date(2025, 10, 8)
        assert memory.add_user("Alice", day = day).user_id == "251008_0001"
        assert memory.add_user("Bob", day = day).user_id == "251008_0002"
        assert memory.add_user("Carol", day = datetime.date(2025, 10, 9)).user_id == "251009_0001"

    def test_update_merges_facts(self, store):
        store.update_user(USER, profile_facts = {"city": "Rome"})
        profile = store.update_user(USER, profile_facts = {"occupation": "nurse"})
        assert dict(profile.profile_facts) == {"city": "Rome", "occupation": "nurse"}
        assert profile.display_name == "Alice"

    def test_face_dimensions_agree(self, store):
        store.update_user(USER, face_embedding = emb(1, 0, 0))
        with pytest.raises(DimensionError):
            store.add_user("Bob", face_embedding = emb(1, 0))

    def test_list_sorted(self, store):
        store.put_user(UserProfile("240101_0003"))
        assert [p.user_id for p in store.list_users()] == ["240101_0003", USER]

class TestDelete:
    def test_purge_count(self, store):
        fill(store, np.random.default_rng(5))
        assert store.delete_user(USER) == 6
        assert not store.has_user(USER)

    def test_fresh_user(self, store):
        assert store.delete_user(USER) == 1

    def test_unknown(self, store):
        with pytest.raises(UnknownUserError):
            store.delete_user(OTHER_USER)

    def test_then_identify_creates_new_user(self, store):
        store.delete_user(USER)
        assert isinstance(identify_user("Alice", None, store), NewUser)

    def test_no_traces_on_disk(self, store_dir):
        rng = np.random.default_rng(6)
        memory = MemoryStore.create(store_dir, 4, 4)
        memory.put_user(UserProfile(USER, display_name = "Alice"))
        memory.put_user(UserProfile(OTHER_USER, display_name = "Bob"))
        ref = memory.put_image(b"alice's kitchen", ".jpg")
        memory.put_scene(scene(rng, image_ref = ref))
        fill(memory, rng)
        fill(memory, rng, user = OTHER_USER)

        assert memory.delete_user(USER) == 7
        assert not (store_dir / ref).exists()

        reloaded = MemoryStore.load(store_dir)
        assert not reloaded.has_user(USER)
        assert reloaded.manifest().scene_count == 3
        for name in ("users.jsonl", "scenes.jsonl", "episodes.jsonl"):
            assert USER not in (store_dir / name).read_text(encoding = "utf-8")

    def test_failed_rewrite_keeps_user(self, store_dir, monkeypatch):
        rng = np.random.default_rng(11)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER, display_name = "Alice"))
        fill(memory, rng)

        def disk_full(*args, **kwargs):
            raise OSError("disk full")

        monkeypatch.setattr(MemoryStore, "_write_snapshot", disk_full)
        with pytest.raises(StorageError, match = "Unable to purge"):
            memory.delete_user(USER)
        assert memory.has_user(USER)
        assert len(memory.scenes_for(USER)) == 3
        assert len(memory.episodes_for(USER)) == 2

        monkeypatch.undo()
        assert MemoryStore.load(store_dir).has_user(USER)
        assert memory.delete_user(USER) == 6
        assert not MemoryStore.load(store_dir).has_user(USER)

class TestPersistence:
    def test_empty_round_trip(self, store_dir):
        MemoryStore.create(store_dir, 8, 16)
        reloaded = MemoryStore.load(store_dir)
        manifest = reloaded.manifest()
        assert (manifest.format_version, manifest.embedding_dim_text, manifest.embedding_dim_mm) == \
            (FORMAT_VERSION, 8, 16)
        assert reloaded.list_users() == []

    def test_bit_exact_round_trip(self, store_dir):
        rng = np.random.default_rng(7)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER, display_name = "Alice", face_embedding = emb(0.1, 0.2, 0.3),
                                    profile_facts = {"city": "Rome"}))
        memory.put_user(UserProfile(OTHER_USER))
        for i in range(100):
            user = (USER, OTHER_USER)[i % 2]
            if i % 3:
                memory.put_scene(scene(rng, user = user, timestamp = i, caption = i % 5 != 0))
            else:
                memory.put_episode(episode(rng, user = user, timestamp = i))

        reloaded = MemoryStore.load(store_dir)
        for user in (USER, OTHER_USER):
            assert reloaded.get_user(user) == memory.get_user(user)
            assert reloaded.scenes_for(user) == memory.scenes_for(user)
            assert reloaded.episodes_for(user) == memory.episodes_for(user)
        originals = {s.id: s.scene_embedding.to_bytes() for u in (USER, OTHER_USER) for s in memory.scenes_for(u)}
        for scene_id, raw in originals.items():
            assert reloaded.get_scene(scene_id).scene_embedding.to_bytes() == raw

    def test_snapshot_equals_log(self, store_dir, tmp_path):
        rng = np.random.default_rng(8)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER))
        fill(memory, rng)
        memory.update_user(USER, display_name = "Alice")
        memory.save(tmp_path / "copy")
        copy = MemoryStore.load(tmp_path / "copy")
        assert copy.get_user(USER).display_name == "Alice"
        assert copy.scenes_for(USER) == MemoryStore.load(store_dir).scenes_for(USER)

    def test_new_ids_after_reload(self, store_dir):
        rng = np.random.default_rng(9)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER))
        fill(memory, rng)
        reloaded = MemoryStore.load(store_dir)
        assert reloaded.put_scene(scene(rng)) == 4

    def test_truncated_vectors(self, store_dir):
        rng = np.random.default_rng(10)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER))
        fill(memory, rng)
        vectors = store_dir / "scenes.vec"
        vectors.write_bytes(vectors.read_bytes()[:-6])
        with pytest.raises(CorruptStoreError, match = "scenes.jsonl:3"):
            MemoryStore.load(store_dir)

    def test_damaged_line(self, store_dir):
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER))
        with open(store_dir / "episodes.jsonl", "a", encoding = "utf-8") as f:
            f.write("{not json\n")
        with pytest.raises(CorruptStoreError, match = "episodes.jsonl:1"):
            MemoryStore.load(store_dir)

    def test_failed_manifest_write_stores_nothing(self, store_dir, monkeypatch):
        rng = np.random.default_rng(12)
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER, display_name = "Alice"))
        fill(memory, rng, scenes = 1, episodes = 1)
        logs = {name: (store_dir / name).read_bytes()
                for name in ("scenes.jsonl", "scenes.vec", "episodes.jsonl", "episodes.vec")}

        def disk_full():
            raise StorageError("disk full")

        monkeypatch.setattr(memory, "_write_manifest", disk_full)
        with pytest.raises(StorageError):
            memory.put_scene(scene(rng, timestamp = 50))
        with pytest.raises(StorageError):
            memory.put_episode(episode(rng, timestamp = 55))
        assert len(memory.scenes_for(USER)) == 1
        assert len(memory.episodes_for(USER)) == 1
        assert len(memory.pool(SCENES, USER, "scene_embedding").ids) == 1
        for name, data in logs.items():
            assert (store_dir / name).read_bytes() == data

        monkeypatch.undo()
        assert memory.put_scene(scene(rng, timestamp = 60)) == 2
        assert memory.put_episode(episode(rng, timestamp = 65)) == 2
        reloaded = MemoryStore.load(store_dir)
        assert [s.timestamp for s in reloaded.scenes_for(USER)] == [0, 60]
        assert [e.timestamp for e in reloaded.episodes_for(USER)] == [5, 65]

    def test_failed_profile_write_keeps_old_profile(self, store, monkeypatch):
        def disk_full():
            raise StorageError("disk full")

        monkeypatch.setattr(store, "_write_manifest", disk_full)
        with pytest.raises(StorageError):
            store.update_user(USER, display_name = "Alicia")
        with pytest.raises(StorageError):
            store.put_user(UserProfile(OTHER_USER, display_name = "Bob"))
        assert store.get_user(USER).display_name == "Alice"
        assert not store.has_user(OTHER_USER)

    @pytest.mark.parametrize("ref", [5, "abc", [1], {"offset": 0}, [None, 4]])
    def test_malformed_vector_reference(self, store_dir, ref):
        memory = MemoryStore.create(store_dir, 4, 4, sync = False)
        memory.put_user(UserProfile(USER))
        entry = {"id": 1, "user_id": USER, "timestamp": 0, "transcript": "hi", "vectors": {"text_embedding": ref}}
        with open(store_dir / "episodes.jsonl", "a", encoding = "utf-8") as f:
            f.write(json.dumps(entry) + "\n")
        with pytest.raises(CorruptStoreError, match = "episodes.jsonl:1"):
            MemoryStore.load(store_dir)

    def test_format_version(self, store_dir):
        MemoryStore.create(store_dir, 4, 4)
        manifest = json.loads((store_dir / "manifest.json").read_text())
        manifest["format_version"] = FORMAT_VERSION + 1
        (store_dir / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(FormatVersionError):
            MemoryStore.load(store_dir)

    def test_missing_store(self, tmp_path):
        with pytest.raises(StorageError):
            MemoryStore.load(tmp_path / "nothing")

    def test_create_refuses_non_empty_directory(self, tmp_path):
        (tmp_path / "file.txt").write_text("x")
        with pytest.raises(StorageError):
            MemoryStore.create(tmp_path, 4, 4)

    def test_open_checks_dimensions(self, store_dir):
        MemoryStore.create(store_dir, 4, 4)
        with pytest.raises(DimensionError):
            MemoryStore.open(store_dir, 8, 4)
        assert MemoryStore.open(store_dir, 4, 4).embedding_dim_text == 4

    def test_volatile_store_has_no_images(self, store):
        with pytest.raises(StorageError):
            store.put_image(b"data")
