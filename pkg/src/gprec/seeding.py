"""Named random substreams derived from one root seed.

Every consumer of randomness (split, parameter init, Gumbel noise, batch
shuffling, synthetic data) asks for its own stream by name, so adding or
removing one consumer never shifts the draws seen by another.
"""
import zlib

import numpy as np
import torch


def substream_seed(root_seed: int, name: str) -> int:
    ss = np.random.SeedSequence([int(root_seed) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFF_FFFF_FFFF_FFFF)


def numpy_rng(root_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(root_seed, name))


def torch_generator(root_seed: int, name: str) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(substream_seed(root_seed, name))
    return g
