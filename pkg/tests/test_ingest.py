from __future__ import annotations

import pytest

from lengthfidelity.errors import DocumentNotFound, EmptyDocument, InvalidEncoding
from lengthfidelity.ingest import load_attachment, load_document
from lengthfidelity.wordcount import count_words


def test_load_document(tmp_path):
    p = tmp_path / "letter.txt"
    text = ("Dear shareholders, it was a strong year. " * 250).strip() + "\n"
    p.write_text(text, encoding="utf-8")
    doc = load_document(p)
    assert doc.text == text
    assert doc.char_count == len(text)
    assert doc.word_count == count_words(text) == 250 * 7
    assert load_document(p) == doc  # idempotent


def test_crlf_matches_lf(tmp_path):
    lf, crlf = tmp_path / "lf.txt", tmp_path / "crlf.txt"
    lf.write_bytes(b"One line.\nTwo lines here.\n")
    crlf.write_bytes(b"One line.\r\nTwo lines here.\r\n")
    a, b = load_document(lf), load_document(crlf)
    assert a.word_count == b.word_count == 5
    assert a.text == b.text


def test_errors(tmp_path):
    with pytest.raises(DocumentNotFound):
        load_document(tmp_path / "missing.txt")
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(EmptyDocument):
        load_document(empty)
    punct = tmp_path / "punct.txt"
    punct.write_text(" ... ,,, ", encoding="utf-8")
    with pytest.raises(EmptyDocument):
        load_document(punct)
    latin = tmp_path / "latin.txt"
    latin.write_bytes("café".encode("latin-1"))
    with pytest.raises(InvalidEncoding):
        load_document(latin)


def test_attachment(tmp_path):
    p = tmp_path / "letter.pdf"
    p.write_bytes(b"%PDF-1.4 fake")
    att = load_attachment(p)
    assert att.mime_type == "application/pdf"
    assert att.filename == "letter.pdf"
    assert att.data_url().startswith("data:application/pdf;base64,")
    (tmp_path / "z.bin").write_bytes(b"")
    with pytest.raises(EmptyDocument):
        load_attachment(tmp_path / "z.bin")
