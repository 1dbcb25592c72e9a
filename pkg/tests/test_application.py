import io
import json
import re

import pytest

from selmem.__main__ import main
from selmem.application import ASK_NAME, Application, Command, SessionFrame, read_session
from selmem.common import *
from selmem.config import CliConfig
from selmem.eval import make_synthetic_memorability_study
from selmem.store import MemoryStore

from .conftest import USER

FRAMES = [
    {"user": USER, "name": "Alice", "ref": "f/1", "timestamp": 1000, "concept": "sunny-park",
     "emotions": {"neutral": 0.9}},
    {"user": USER, "name": "Alice", "ref": "f/1", "timestamp": 2000, "concept": "sunny-park",
     "emotions": {"neutral": 0.9}},
    {"user": USER, "ref": "f/3", "timestamp": 3000, "concept": "rainy-harbor", "emotions": {"happy": 0.9}},
]

def write_session(path, frames=FRAMES):
    path.write_text("\n".join(json.dumps(f) for f in frames) + "\n", encoding = "utf-8")
    return path

@pytest.fixture
def cfg(tmp_path):
    return CliConfig(store_path = tmp_path / "memory.store", text_dim = 32, mm_dim = 32)

class Run():
    """Runs commands against one configuration and keeps the printed output."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.output = ""

    def __call__(self, command, **kwargs):
        out = io.StringIO()
        code = Application(self.cfg, out = out).run(command, **kwargs)
        self.output = out.getvalue()
        return code

@pytest.fixture
def run(cfg):
    return Run(cfg)

@pytest.fixture
def captured(run, tmp_path):
    assert run(Command.CAPTURE, session_file = write_session(tmp_path / "session.jsonl")) == EXIT_OK
    return run

class TestCapture:
    def test_summary(self, captured, cfg):
        lines = captured.output.splitlines()
        assert len(lines) == 4
        assert "stored #1" in lines[0] and "first_scene" in lines[0]
        assert "skipped" in lines[1]
        assert "stored #2" in lines[2] and "emotion" in lines[2]
        assert lines[3] == "3 frames, 2 stored, 1 skipped (emotion 1, novelty 1, first_scene 1)"

        store = MemoryStore.open(cfg.store_path, 32, 32)
        assert store.get_user(USER).display_name == "Alice"
        scenes = store.scenes_for(USER)
        assert [s.caption.split()[0] for s in scenes] == ["sunny-park", "rainy-harbor"]
        assert [s.image_ref for s in scenes] == ["f/1", "f/3"]

    def test_parallel_workers(self, run, tmp_path):
        other = [dict(f, user = "251008_0002", name = "Bob", ref = "g" + f["ref"]) for f in FRAMES]
        write_session(tmp_path / "both.jsonl", FRAMES + other)
        assert run(Command.CAPTURE, session_file = tmp_path / "both.jsonl", workers = 2) == EXIT_OK
        assert run.output.splitlines()[-1].startswith("6 frames, 4 stored, 2 skipped")

    def test_missing_session(self, run, tmp_path):
        assert run(Command.CAPTURE, session_file = tmp_path / "none.jsonl") == EXIT_CONFIG

    def test_malformed_session(self, run, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(FRAMES[0]) + "\n{not json\n", encoding = "utf-8")
        with pytest.raises(SchemaError, match = "bad.jsonl:2"):
            read_session(path)
        assert run(Command.CAPTURE, session_file = path) == EXIT_CONFIG

    def test_frame_without_concept_is_unresolvable(self, run, tmp_path):
        path = write_session(tmp_path / "s.jsonl", [{"user": USER, "ref": "x", "timestamp": 1}])
        assert run(Command.CAPTURE, session_file = path) == EXIT_CONFIG

    @pytest.mark.parametrize("change", [
        {"user": "alice"},
        {"timestamp": True},
        {"timestamp": -1},
        {"ref": ""},
        {"complexity": 1.5},
        {"emotions": {"bored": 1.0}},
    ])
    def test_invalid_frames(self, change):
        with pytest.raises(SchemaError):
            SessionFrame(dict(FRAMES[0], **change))

    def test_frame_needs_fields(self):
        with pytest.raises(SchemaError, match = "timestamp"):
            SessionFrame({"user": USER, "ref": "x"})

class TestQuery:
    def test_retrieves_scene(self, captured):
        assert captured(Command.QUERY, user = USER, text = "show me the rainy-harbor") == EXIT_OK
        assert captured.output.startswith("winner: scene  (single pool)")
        assert "rainy-harbor" in captured.output

    def test_by_name(self, captured):
        assert captured(Command.QUERY, user = "Alice", text = "what did we see?") == EXIT_OK
        assert captured.output.startswith("winner:")

    def test_session_end_stores_episode(self, captured, cfg):
        assert captured(Command.QUERY, user = USER, text = "Goodbye!", timestamp = 2500) == EXIT_OK
        assert captured.output.strip() == f"Stored episode 1 for {USER}. Goodbye!"
        assert MemoryStore.open(cfg.store_path, 32, 32).episodes_for(USER)[0].transcript == "Goodbye!"
        assert captured(Command.QUERY, user = USER, text = "what about the sunny-park?") == EXIT_OK
        assert "pair gap:" in captured.output

    def test_session_end_with_transcript(self, captured, cfg, tmp_path):
        transcript = tmp_path / "talk.txt"
        transcript.write_text("We walked through the park and fed the ducks.\n", encoding = "utf-8")
        assert captured(Command.QUERY, user = USER, text = "bye", transcript = transcript, timestamp = 10) == EXIT_OK
        episode = MemoryStore.open(cfg.store_path, 32, 32).episodes_for(USER)[0]
        assert episode.transcript == "We walked through the park and fed the ducks."
        assert captured(Command.QUERY, user = USER, text = "bye", transcript = tmp_path / "gone.txt") == EXIT_CONFIG

    def test_profile_update(self, captured, cfg):
        assert captured(Command.QUERY, user = USER, text = "My name is Dana and I live in Rome") == EXIT_OK
        assert captured.output.splitlines() == ["Remembered city: Rome", "Remembered name: Dana"]
        profile = MemoryStore.open(cfg.store_path, 32, 32).get_user(USER)
        assert profile.display_name == "Alice"
        assert dict(profile.profile_facts) == {"name": "Dana", "city": "Rome"}

    def test_nothing_to_remember(self, captured):
        assert captured(Command.QUERY, user = USER, text = "I really like") == EXIT_OK
        assert captured.output.strip() == "Nothing to remember in that."

    def test_close_name_asks(self, captured):
        assert captured(Command.QUERY, user = "Alina", text = "hello") == EXIT_OK
        assert captured.output.strip() == f"Did you mean Alice ({USER})? Please confirm your name."

    def test_new_user(self, captured):
        assert captured(Command.QUERY, user = "Zoe", text = "hello") == EXIT_OK
        lines = captured.output.splitlines()
        match = re.fullmatch(r"Nice to meet you, Zoe\. Your profile id is (\d{6}_\d{4})\.", lines[0])
        assert match
        assert lines[1] == f"I don't have any memories with {match.group(1)} yet."

    def test_unknown_user_id(self, captured):
        assert captured(Command.QUERY, user = "251008_0099", text = "hello") == EXIT_NOT_FOUND

    def test_no_store(self, run):
        assert run(Command.QUERY, user = USER, text = "hello") == EXIT_CONFIG

    def test_nameless_user_is_asked_for_name(self, run, cfg, tmp_path):
        frame = {"user": "251008_0009", "ref": "z/1", "timestamp": 1, "concept": "sunny-park",
                 "emotions": {"happy": 0.9}}
        assert run(Command.CAPTURE, session_file = write_session(tmp_path / "s.jsonl", [frame])) == EXIT_OK

        for text in ("show me the sunny-park", "Goodbye!", "I live in Rome"):
            assert run(Command.QUERY, user = "251008_0009", text = text, timestamp = 5) == EXIT_OK
            assert run.output.strip() == ASK_NAME
        store = MemoryStore.open(cfg.store_path, 32, 32)
        assert store.episodes_for("251008_0009") == []
        assert dict(store.get_user("251008_0009").profile_facts) == {}

        assert run(Command.QUERY, user = "251008_0009", text = "My name is Zoe") == EXIT_OK
        assert run.output.splitlines() == ["Remembered name: Zoe"]
        assert run(Command.QUERY, user = "251008_0009", text = "show me the sunny-park") == EXIT_OK
        assert run.output.startswith("winner: scene")
        assert MemoryStore.open(cfg.store_path, 32, 32).get_user("251008_0009").display_name == "Zoe"

class TestUsers:
    def test_list(self, captured):
        assert captured(Command.USERS, action = "list") == EXIT_OK
        header, row = captured.output.splitlines()
        assert header.split() == ["user", "name", "scenes", "episodes", "facts"]
        assert row.split() == [USER, "Alice", "2", "0"]

    def test_delete(self, captured, cfg):
        assert captured(Command.USERS, action = "delete", user_id = USER) == EXIT_OK
        assert re.fullmatch(rf"Deleted user {USER}: \d+ records purged", captured.output.strip())
        assert MemoryStore.open(cfg.store_path, 32, 32).list_users() == []
        assert captured(Command.USERS, action = "delete", user_id = USER) == EXIT_NOT_FOUND
        assert captured(Command.USERS, action = "delete") == EXIT_CONFIG

def test_inspect(captured):
    assert captured(Command.INSPECT) == EXIT_OK
    lines = captured.output.splitlines()
    assert lines[0] == "format_version: 1"
    assert "counts: {'users': 1, 'scenes': 2, 'episodes': 0}" in lines
    assert lines[-1] == f"  {USER}: 2 scenes, 0 episodes"

class TestEval:
    def test_retrieval(self, run, tmp_path):
        out_dir = tmp_path / "reports"
        assert run(Command.EVAL, suite = "retrieval", out_dir = out_dir, items = 20) == EXIT_OK
        assert "Fusion (" in run.output
        document = json.loads((out_dir / "retrieval.json").read_text())
        assert document["items"] == 20 and len(document["fusion"]) == 11
        assert (out_dir / "retrieval.txt").read_text() == run.output

    @pytest.mark.slow
    def test_memorability_synthetic(self, run, tmp_path):
        assert run(Command.EVAL, suite = "memorability", out_dir = tmp_path, repeats = 1) == EXIT_OK
        assert "Human consistency" in run.output
        assert "interval (n=5)" in run.output and "interval (n=10)" in run.output
        document = json.loads((tmp_path / "memorability.json").read_text())
        assert document["images"] == 81
        assert len(document["configs"]) == 6

    def test_memorability_from_files(self, run, tmp_path):
        study = make_synthetic_memorability_study(n_images = 45, n_raters = 3, seed = 1)
        study.features.to_frame().iloc[::-1].to_csv(tmp_path / "features.csv", index = False)
        study.ratings.to_csv(tmp_path / "ratings.csv")
        code = run(Command.EVAL, suite = "memorability", out_dir = tmp_path / "out", repeats = 1,
                   features = tmp_path / "features.csv", ratings = tmp_path / "ratings.csv")
        assert code == EXIT_OK
        assert json.loads((tmp_path / "out" / "memorability.json").read_text())["raters"] == 3

    def test_memorability_inputs(self, run, tmp_path):
        assert run(Command.EVAL, suite = "memorability", features = tmp_path / "f.csv") == EXIT_CONFIG
        assert run(Command.EVAL, suite = "memorability", features = tmp_path / "f.csv",
                   ratings = tmp_path / "r.csv") == EXIT_CONFIG

def test_bench_is_reproducible(run):
    assert run(Command.BENCH, size = 30, dim = 16, queries = 4) == EXIT_OK
    first = run.output.splitlines()
    assert first[0] == "30 scenes + 30 episodes, dim 16, 4 queries"
    assert first[1].startswith("latency ms: mean ")
    assert run(Command.BENCH, size = 30, dim = 16, queries = 4) == EXIT_OK
    assert run.output.splitlines()[2] == first[2]
    assert run(Command.BENCH, size = 0) == EXIT_CONFIG

class TestMain:
    def test_flow(self, tmp_path, capsys):
        store = str(tmp_path / "memory.store")
        session = write_session(tmp_path / "session.jsonl")
        assert main(["--store", store, "capture", str(session)]) == EXIT_OK
        assert main(["--store", store, "users", "list"]) == EXIT_OK
        assert USER in capsys.readouterr().out

    def test_missing_store(self, tmp_path, capsys):
        assert main(["--store", str(tmp_path / "none"), "inspect"]) == EXIT_CONFIG
        assert "No memory store" in capsys.readouterr().err

    def test_bad_flag_value(self, tmp_path):
        assert main(["--store", str(tmp_path), "--alpha", "2", "inspect"]) == EXIT_CONFIG
        assert main(["--weights", "1,1", "inspect"]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main(["--config", str(tmp_path / "none.yaml"), "inspect"]) == EXIT_CONFIG

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert capsys.readouterr().out.startswith("selmem ")
