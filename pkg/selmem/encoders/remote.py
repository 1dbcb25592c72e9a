"""Client of a remote embedding service.

Request (HTTP POST, JSON):

    {"kind": "text" | "multimodal", "modality": "text" | "image", "inputs": [...]}

Response:

    {"embeddings": [[float, ...], ...], "dim": n}

A failed request is retried once, after the delay asked for by the service's
Retry-After header or else after a short random delay.

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
import email.utils
import logging
import math
import random
import time

from typing import List, Optional, Sequence

import requests

from ..common import *
from ..core import Embedding
from .type import EncoderDescriptor, EncoderKind, check_batch

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 10.0

# Bounds of the random delay before the retry, seconds
RETRY_JITTER = (0.1, 0.5)

# Longest server-requested delay honoured before the retry, seconds
MAX_RETRY_AFTER = 30.0

def parse_retry_after(value: Optional[str]) -> Optional[float]:
    """Seconds to wait from a Retry-After header (delta-seconds or HTTP date), or None."""
    if value is None:
        return None
    value = value.strip()
    try:
        seconds = float(value)
    except ValueError:
        try:
            when = email.utils.parsedate_to_datetime(value)
        except (TypeError, ValueError):
            return None
        if when.tzinfo is None:
            when = when.replace(tzinfo = datetime.timezone.utc)
        seconds = (when - datetime.datetime.now(datetime.timezone.utc)).total_seconds()
    if math.isnan(seconds):
        return None
    return min(max(seconds, 0.0), MAX_RETRY_AFTER)

class RemoteClient():
    """Blocking request/response transport to one endpoint."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT,
                 session: Optional[requests.Session] = None, attempts: int = 2) -> None:
        self.endpoint = endpoint
        self.timeout = timeout
        self.session = session if session is not None else requests.Session()
        self.attempts = attempts

    def embed(self, kind: EncoderKind, modality: str, inputs: List[str], dim: int) -> List[Embedding]:
        """Send one batch and return its embeddings.

        Raises:
            EncoderUnavailableError: No attempt produced a response.
            SchemaError: The response is malformed.
            DimensionError: The service answered with another dimension.
        """
        payload = {"kind": kind.value, "modality": modality, "inputs": inputs}
        retry_after = 0.0
        for attempt in range(1, self.attempts + 1):
            requested = None
            try:
                response = self.session.post(self.endpoint, json = payload, timeout = self.timeout)
                if response.status_code in (429, 503):
                    requested = parse_retry_after(response.headers.get("Retry-After"))
                    if requested is not None:
                        retry_after = requested
                    raise requests.HTTPError(f"Service answered {response.status_code}, "
                                             f"retry after {requested if requested is not None else 'unknown'}s")
                response.raise_for_status()
                document = response.json()
                break
            except (requests.RequestException, ValueError) as e:
                logger.warning("Encoder request %d/%d to %s failed: %s", attempt, self.attempts, self.endpoint, e)
                if attempt == self.attempts:
                    raise EncoderUnavailableError(f"Encoder service {self.endpoint} unavailable: {e}",
                                                  attempts = attempt, retry_after = max(retry_after, RETRY_JITTER[1])) from e
                time.sleep(requested if requested is not None else random.uniform(*RETRY_JITTER))

        try:
            rows = document["embeddings"]
            reported = int(document["dim"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"Malformed encoder response from {self.endpoint}: {e}") from None
        if reported != dim:
            raise DimensionError(f"Encoder service reports dimension {reported}, expected {dim}")
        if len(rows) != len(inputs):
            raise SchemaError(f"Encoder service returned {len(rows)} embeddings for {len(inputs)} inputs")
        return [Embedding(row) for row in rows]

class RemoteTextEncoder():
    def __init__(self, client: RemoteClient, dim: int) -> None:
        self.client = client
        self.descriptor = EncoderDescriptor(EncoderKind.TEXT, dim, f"remote-text:{client.endpoint}")

    def encode_text(self, texts: Sequence[str]) -> List[Embedding]:
        embeddings = self.client.embed(EncoderKind.TEXT, "text", check_batch(texts), self.descriptor.dim)
        return [self.descriptor.check(e) for e in embeddings]

class RemoteMultimodalEncoder():
    def __init__(self, client: RemoteClient, dim: int) -> None:
        self.client = client
        self.descriptor = EncoderDescriptor(EncoderKind.MULTIMODAL, dim, f"remote-mm:{client.endpoint}")

    def encode_query_multimodal(self, text: str) -> Embedding:
        return self.descriptor.check(self.client.embed(EncoderKind.MULTIMODAL, "text", [text], self.descriptor.dim)[0])

    def encode_image_ref(self, ref: str) -> Embedding:
        return self.descriptor.check(self.client.embed(EncoderKind.MULTIMODAL, "image", [ref], self.descriptor.dim)[0])
