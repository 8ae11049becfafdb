"""Counter-based random streams.

Streams use numpy's Philox4x64-10 bit generator keyed by the 128-bit value
``seed + (stream << 64)``; the counter starts at zero. Gaussian variates
come from ``numpy.random.Generator.standard_normal``. A (seed, stream) pair
therefore names a fixed sequence independent of how many other streams
exist or in which order they are consumed.
"""
import numpy as np

RNG_NAME = "philox4x64-10/numpy-generator"

_MASK64 = (1 << 64) - 1


def make_stream(seed: int, stream: int = 0) -> np.random.Generator:
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed <= _MASK64 or not 0 <= stream <= _MASK64:
        raise ValueError("seed and stream must fit in 64 unsigned bits")
    return np.random.Generator(np.random.Philox(key=seed | (stream << 64)))
