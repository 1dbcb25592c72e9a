import pytest

from selmem.common import *
from selmem.identity import Intent, RuleBasedIntentClassifier, classify_intent, extract_profile_facts

@pytest.fixture(scope = "module")
def classifier():
    return RuleBasedIntentClassifier.from_yaml()

@pytest.mark.parametrize("utterance, intent", [
    ("My name is Dana and I live in Rome", Intent.PROFILE_UPDATE),
    ("I work as a nurse", Intent.PROFILE_UPDATE),
    ("Goodbye!", Intent.SESSION_END),
    ("ok, see you tomorrow", Intent.SESSION_END),
    ("What did we look at yesterday?", Intent.CONTINUE),
    ("Where was that cafe?", Intent.CONTINUE),
])
def test_default_patterns(classifier, utterance, intent):
    assert classify_intent(utterance, classifier) is intent

def test_empty_utterance(classifier):
    with pytest.raises(SchemaError):
        classify_intent("  ", classifier)

def test_failing_classifier_continues():
    class Broken:
        def classify(self, utterance):
            raise RuntimeError("model offline")

    class Confused:
        def classify(self, utterance):
            return "SessionEnd"

    assert classify_intent("bye", Broken()) is Intent.CONTINUE
    assert classify_intent("bye", Confused()) is Intent.CONTINUE

def test_custom_pattern_file(tmp_path):
    path = tmp_path / "patterns.yaml"
    path.write_text("session_end:\n  - '\\bciao\\b'\n", encoding = "utf-8")
    classifier = RuleBasedIntentClassifier.from_yaml(path)
    assert classify_intent("Ciao!", classifier) is Intent.SESSION_END
    assert classify_intent("Goodbye", classifier) is Intent.CONTINUE

@pytest.mark.parametrize("patterns", [
    {"smalltalk": ["hello"]},
    {"session_end": ["(unclosed"]},
])
def test_invalid_patterns(patterns):
    with pytest.raises(ConfigError):
        RuleBasedIntentClassifier(patterns)

def test_unreadable_pattern_file(tmp_path):
    with pytest.raises(ConfigError):
        RuleBasedIntentClassifier.from_yaml(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n", encoding = "utf-8")
    with pytest.raises(ConfigError):
        RuleBasedIntentClassifier.from_yaml(bad)

@pytest.mark.parametrize("utterance, facts", [
    ("My name is Dana and I live in Rome", {"name": "Dana", "city": "Rome"}),
    ("I'm from New York", {"city": "New York"}),
    ("I work as a nurse in Oslo", {"occupation": "nurse"}),
    ("I really like hiking and chess.", {"interests": "hiking and chess"}),
    ("What did we do yesterday?", {}),
])
def test_extract_profile_facts(utterance, facts):
    assert extract_profile_facts(utterance) == facts
