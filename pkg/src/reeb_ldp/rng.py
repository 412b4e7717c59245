"""Counter-addressed Gaussian noise streams.

Every normal variate is addressed by an absolute index into a Philox
stream, so any slice of a stream can be regenerated independently of
how work is chunked across workers.  Uniforms come straight from the
raw 64-bit counter output and are mapped through the exact inverse
normal CDF; consumption is therefore one word per normal, which keeps
the (trajectory, step, component) -> index arithmetic airtight.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_INV_2_53 = 2.0 ** -53


def derive_key(seed, stream):
    """128-bit Philox key from (seed, stream label), stable across runs."""
    raw = f"{int(seed)}|{stream}".encode()
    digest = hashlib.sha256(raw).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


class CounterRng:
    """Stateless stream of N(0,1) variates addressable by absolute index."""

    def __init__(self, seed, stream="main"):
        self.seed = int(seed)
        self.stream = str(stream)
        self._key = derive_key(seed, stream)

    def spawn(self, stream):
        """Independent stream under the same base seed."""
        return CounterRng(self.seed, f"{self.stream}/{stream}")

    def raw_words(self, start, count):
        """uint64 words [start, start+count) of this stream."""
        if count <= 0:
            return np.empty(0, dtype=np.uint64)
        block0, lane0 = divmod(int(start), 4)
        nwords = lane0 + int(count)
        bg = np.random.Philox(key=self._key, counter=[block0, 0, 0, 0])
        words = bg.random_raw(-(-nwords // 4) * 4)
        return words[lane0:lane0 + count]

    def uniforms(self, start, count):
        """Uniforms in (0,1), one word each (53-bit mantissa, half-ulp shift)."""
        words = self.raw_words(start, count)
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53

    def normals(self, start, count):
        """Standard normals at absolute indices [start, start+count)."""
        return ndtri(self.uniforms(start, count))

    def step_normals(self, step, traj_lo, traj_hi, width, n_total):
        """Normals for trajectories [traj_lo, traj_hi) at a given step.

        Index layout is (step * n_total + traj) * width + component, so the
        same trajectory sees the same numbers no matter how the batch is
        chunked.  Returns shape (traj_hi - traj_lo, width).
        """
        start = (step * n_total + traj_lo) * width
        count = (traj_hi - traj_lo) * width
        return self.normals(start, count).reshape(traj_hi - traj_lo, width)
