"""Intent classification and profile fact extraction.

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
import importlib.resources
import logging
import re

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import yaml

from ..common import *
from .type import Intent

logger = logging.getLogger(__name__)

DEFAULT_PATTERNS_FILE = "intent_patterns.yaml"

# YAML key of each intent, in the order the classifier checks them
_PATTERN_KEYS = (
    ("profile_update", Intent.PROFILE_UPDATE),
    ("session_end",    Intent.SESSION_END),
)

class RuleBasedIntentClassifier():
    """Assigns the first intent whose pattern list matches the utterance."""

    def __init__(self, patterns: Mapping[str, Sequence[str]]) -> None:
        """Instantiate the class.

        Args:
            patterns:
                Regular expressions per key ("profile_update", "session_end").

        Raises:
            ConfigError: Unknown key or invalid regular expression.
        """
        unknown = set(patterns) - {key for key, _ in _PATTERN_KEYS}
        if unknown:
            raise ConfigError(f"Unknown intent pattern keys: {', '.join(sorted(unknown))}")
        self._rules: List[tuple] = []
        for key, intent in _PATTERN_KEYS:
            for pattern in patterns.get(key) or ():
                try:
                    self._rules.append((intent, re.compile(pattern, re.IGNORECASE)))
                except re.error as e:
                    raise ConfigError(f"Invalid {key} pattern {pattern!r}: {e}") from None

    @classmethod
    def from_yaml(cls, path: Optional[Union[str, Path]] = None) -> "RuleBasedIntentClassifier":
        """Load patterns from a YAML file, or the packaged defaults if `path` is None."""
        try:
            if path is None:
                text = importlib.resources.files(__package__).joinpath(DEFAULT_PATTERNS_FILE).read_text(encoding = "utf-8")
            else:
                text = Path(path).read_text(encoding = "utf-8")
            document = yaml.safe_load(text) or {}
        except OSError as e:
            raise ConfigError(f"Unable to read intent patterns: {e}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"Malformed intent patterns: {e}") from None
        if not isinstance(document, dict):
            raise ConfigError("Intent patterns must be a mapping")
        return cls(document)

    def classify(self, utterance: str) -> Intent:
        for intent, regex in self._rules:
            if regex.search(utterance):
                return intent
        return Intent.CONTINUE

def classify_intent(utterance: str, classifier) -> Intent:
    """Intent of an utterance. A failing classifier yields Continue.

    Raises:
        SchemaError: The utterance is empty.
    """
    if not utterance or not utterance.strip():
        raise SchemaError("Cannot classify an empty utterance")
    try:
        intent = classifier.classify(utterance)
    except Exception as e:
        logger.warning("Intent classifier failed, assuming Continue: %s", e)
        return Intent.CONTINUE
    if not isinstance(intent, Intent):
        logger.warning("Intent classifier returned %r, assuming Continue", intent)
        return Intent.CONTINUE
    return intent

# A fact value ends at punctuation or before one of these words
_STOP = r"(?=\s+(?:and|but|in|at|for|from|of|with)\b|\s*[,.!?;]|\s*$)"

_FACT_PATTERNS = {
    "name":       re.compile(r"(?i:\bmy name is|\bi am called|\bcall me)\s+([^\W\d_][\w'-]*)"),
    "city":       re.compile(r"(?i:\bi live in|\bi(?: am|'m) from|\bi come from)\s+([A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*)"),
    "occupation": re.compile(r"(?i:\bi work as(?: an?)?|\bmy job is|\bi(?: am|'m) an?)\s+([\w -]+?)" + _STOP),
    "interests":  re.compile(r"(?i:\bi (?:really )?(?:like|love|enjoy)|\bmy hobb(?:y is|ies are)|"
                             r"\bi(?: am|'m) interested in)\s+([\w ,'-]+?)(?=\s*[.!?;]|\s*$)"),
}

def extract_profile_facts(utterance: str) -> Dict[str, str]:
    """Pull name, city, occupation and interests out of a self-introduction.

    Only facts that are found are returned, e.g.
    "My name is Dana and I live in Rome" -> {"name": "Dana", "city": "Rome"}.
    """
    facts = {}
    for key, regex in _FACT_PATTERNS.items():
        match = regex.search(utterance)
        if match:
            value = match.group(1).strip(" ,")
            if value:
                facts[key] = value
    return facts
