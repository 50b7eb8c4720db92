from kvnlab.helpers import create_and_write_file, default_threads, fft_workers, file_sha256, set_log_level
from pathlib import Path
import hashlib, pytest, scipy.fft


def test_create_and_write_file(tmp_path):
    # Test creating a file that does not exist
    filename = tmp_path / "test.txt"
    text = "This is a test file."
    create_and_write_file(filename, text)
    assert Path(filename).exists()
    assert Path(filename).read_text() == text

    # Test creating a file that already exists with overwrite=True
    text = "This is a new test file."
    create_and_write_file(filename, text, overwrite=True)
    assert Path(filename).read_text() == text

    # Test creating a file that already exists with overwrite=False
    with pytest.raises(ValueError):
        create_and_write_file(filename, text, overwrite=False)

    # Bytes are written in binary mode
    create_and_write_file(tmp_path / "test.bin", b"\x00\x01\xff")
    assert (tmp_path / "test.bin").read_bytes() == b"\x00\x01\xff"


def test_file_sha256(tmp_path):
    content = b"kvnlab" * 100_000
    create_and_write_file(tmp_path / "data.bin", content)
    assert file_sha256(tmp_path / "data.bin") == hashlib.sha256(content).hexdigest()


def test_default_threads(monkeypatch):
    monkeypatch.delenv("KVNLAB_THREADS", raising=False)
    assert default_threads() == 1
    monkeypatch.setenv("KVNLAB_THREADS", "3")
    assert default_threads() == 3


def test_fft_workers():
    before = scipy.fft.get_workers()
    with fft_workers(2):
        assert scipy.fft.get_workers() == 2
    assert scipy.fft.get_workers() == before


def test_set_log_level():
    # Swapping the sink back and forth must not raise
    set_log_level("DEBUG")
    set_log_level("WARNING")
