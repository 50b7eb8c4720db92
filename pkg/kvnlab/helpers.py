from contextlib import contextmanager
from loguru import logger
from pathlib import Path
import hashlib, os, scipy.fft, sys

# ---------------------------------------------------------------------------- #
#                    Global logging configuration for loguru                   #
# ---------------------------------------------------------------------------- #


logger.remove()
logger_format = (
    "<level>{time}</level> {message} | <level>{level}</level> "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan>"
)
_sink_id = logger.add(
    sys.stderr, catch=True, format=logger_format, level=os.getenv("LOG_LEVEL", "WARNING").upper()
)
logger = logger.opt(colors=True)


def set_log_level(level):
    """Replace the stderr sink with one at the given level."""
    global _sink_id  # noqa: PLW0603
    logger.remove(_sink_id)
    _sink_id = logger.add(sys.stderr, catch=True, format=logger_format, level=level.upper())


# ---------------------------------------------------------------------------- #
#                                Misc functions                                #
# ---------------------------------------------------------------------------- #


def create_and_write_file(filename, content, overwrite=False):
    """Create a file and write text (or bytes) to it."""
    if Path(filename).exists() and not overwrite:
        raise ValueError(f"File '{filename}' already exists and overwrite is False.")

    mode = "wb" if isinstance(content, bytes) else "w"
    with Path(filename).open(mode) as f:
        f.write(content)


def file_sha256(filename):
    digest = hashlib.sha256()
    with Path(filename).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def default_threads():
    return int(os.getenv("KVNLAB_THREADS", "1"))


@contextmanager
def fft_workers(threads):
    """Bound the worker count of every scipy.fft call made inside the block."""
    threads = threads or default_threads()
    logger.debug(f"Using {threads} FFT worker(s)")
    with scipy.fft.set_workers(threads):
        yield
