"""Source document loading.

Documents are pre-extracted UTF-8 text. For providers that read files
natively, :func:`load_attachment` passes an arbitrary file through untouched;
such documents cannot be word-counted locally, which is fine because only
outputs are scored.
"""

from __future__ import annotations

import base64
import mimetypes
from dataclasses import dataclass
from pathlib import Path

from .errors import DocumentNotFound, EmptyDocument, InvalidEncoding
from .wordcount import count_words


@dataclass(frozen=True)
class SourceDocument:
    path: str
    text: str
    char_count: int
    word_count: int

    def __bool__(self) -> bool:
        return bool(self.text)


@dataclass(frozen=True)
class Attachment:
    """An opaque file forwarded to the provider as-is."""

    path: str
    data: bytes
    mime_type: str

    @property
    def filename(self) -> str:
        return Path(self.path).name

    def data_url(self) -> str:
        return f"data:{self.mime_type};base64,{base64.b64encode(self.data).decode('ascii')}"

    def __bool__(self) -> bool:
        return bool(self.data)


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise DocumentNotFound(f"document not found: {path}") from None
    except IsADirectoryError:
        raise DocumentNotFound(f"document path is a directory: {path}") from None


def load_document(path: str | Path) -> SourceDocument:
    path = Path(path)
    raw = _read_bytes(path)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{path} is not valid UTF-8 ({exc.reason} at byte {exc.start})") from None
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if not text.strip():
        raise EmptyDocument(f"{path} is empty")
    words = count_words(text)
    if words == 0:
        raise EmptyDocument(f"{path} contains no countable words")
    return SourceDocument(str(path), text, len(text), words)


def load_attachment(path: str | Path, mime_type: str | None = None) -> Attachment:
    path = Path(path)
    data = _read_bytes(path)
    if not data:
        raise EmptyDocument(f"{path} is empty")
    mime = mime_type or mimetypes.guess_type(path.name)[0] or "application/octet-stream"
    return Attachment(str(path), data, mime)
