"""
Utility functions for advlayout.

Provides logging setup, seed derivation, the project PRNG, and atomic file
writes.
"""

import hashlib
import logging
import os
import tempfile
from typing import Union

import numpy as np


default_logger = logging.getLogger('advlayout')
default_logger.setLevel(logging.DEBUG)
if not default_logger.handlers:
    handler = logging.StreamHandler()
    formatter = logging.Formatter('%(levelname)s: %(name)s - %(message)s')
    handler.setFormatter(formatter)
    default_logger.addHandler(handler)


def derive_seed(seed: int, tag: str) -> int:
    """Derive an independent sub-seed for a named consumer of randomness."""
    content = f"{seed}:{tag}"
    digest = hashlib.sha256(content.encode()).digest()
    return int.from_bytes(digest[:8], 'big') & ((1 << 63) - 1)


def make_rng(seed: int, tag: str = "") -> np.random.Generator:
    """PCG64 generator; with a tag the seed is first split by derive_seed."""
    if tag:
        seed = derive_seed(seed, tag)
    return np.random.Generator(np.random.PCG64(seed))


def atomic_write_text(path: Union[str, os.PathLike], content: str) -> None:
    """Write a text file via temp file + rename so readers never see partial data."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix='.tmp_', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', newline='\n') as f:
            f.write(content)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def format_float(value: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(value))
