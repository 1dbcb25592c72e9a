"""Common definitions for the package.

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

APP_NAME = "selmem"
PACKAGE_NAME = "selmem"

# Exit codes of the command line interface
EXIT_OK        = 0
EXIT_CONFIG    = 2
EXIT_NOT_FOUND = 3

class SelMemException(Exception):
    """Root of all errors raised by the package."""
    pass

class DimensionError(SelMemException, ValueError):
    pass

class DegenerateVectorError(SelMemException, ValueError):
    pass

class EmptyPoolError(SelMemException, ValueError):
    pass

class ThresholdError(SelMemException, ValueError):
    pass

class SchemaError(SelMemException, ValueError):
    pass

class ConfigError(SelMemException, ValueError):
    pass

class DomainError(SelMemException, ValueError):
    pass

class DegenerateInputError(SelMemException, ValueError):
    pass

class StorageError(SelMemException, OSError):
    pass

class FormatVersionError(StorageError):
    pass

class CorruptStoreError(StorageError):
    pass

class UnknownUserError(SelMemException, KeyError):
    pass

class UnknownRefError(SelMemException, KeyError):
    pass

class NoMemoriesError(SelMemException):
    pass

class DescriberError(SelMemException):
    pass

class DetectorError(SelMemException):
    pass

class EncoderUnavailableError(SelMemException):
    """Raised by remote encoders when the service cannot be reached.

    Attributes:
        attempts:
            Number of requests that were sent before giving up.
        retry_after:
            Suggested delay in seconds before the caller tries again.
    """
    def __init__(self, message: str, attempts: int = 0, retry_after: float = 0.0) -> None:
        super().__init__(message)
        self.attempts = attempts
        self.retry_after = retry_after

def get_version() -> str:
    try:
        from importlib import metadata
        version = metadata.version(PACKAGE_NAME)
        if not version:
            raise ValueError("Can't find version from importlib metadata")
        return version
    except (ImportError, ValueError):
        pass

    try:
        from .version import __version__ # type: ignore
        return __version__
    except ImportError:
        pass

    return ""

class Modality(enum.Enum):
    """The two memory pools searched by the hybrid retrieval."""

    # Conversational episodes (text memories)
    EPISODE = "episode"

    # Captured scenes (image + caption memories)
    SCENE   = "scene"
