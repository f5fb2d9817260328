"""Deterministic random streams.

Every random draw in the package comes from a Philox4x64-10 counter-based
generator (numpy's ``Philox`` bit generator, used only for its raw 64-bit
words).  A stream is addressed by a two-word key ``(seed, domain << 32 | index)``
and starts at block counter 0, so the first four words of ``Stream(0, 0)``
are the Random123 known-answer vector::

    0x16554d9eca36314c 0xdb20fe9d672d0fdc 0xd7e772cee186176b 0x7e68b68aec7ba23b

Conversions are fixed here rather than delegated to ``numpy.random.Generator``
whose distribution algorithms are allowed to change between numpy releases:

* uniform: ``(word >> 11) * 2**-53`` in [0, 1)
* integer in [lo, hi]: ``lo + word % (hi - lo + 1)``
* normal: basic Box-Muller on consecutive uniform pairs ``(u1, u2)``,
  ``r = sqrt(-2 log(1 - u1))``, emitting ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``.  Odd requests discard the final sine.
"""

import numpy as np

_MAX64 = np.uint64(0xFFFFFFFFFFFFFFFF)

# stream domains
HMM_PARAMS = 1
UTTERANCE = 2
SHUFFLE = 3
NET_INIT = 4


def stream_key(seed, domain, index=0):
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit word")
    if index < 0 or index >= 2**32:
        raise ValueError("stream index must fit in 32 bits")
    return int(seed), (int(domain) << 32) | int(index)


class Stream:
    """A reproducible stream of random words keyed by ``(k0, k1)``."""

    def __init__(self, k0, k1=0):
        # numpy pre-increments the counter, so start one block before zero
        self._bg = np.random.Philox(key=[k0, k1], counter=[_MAX64] * 4)

    @classmethod
    def for_domain(cls, seed, domain, index=0):
        return cls(*stream_key(seed, domain, index))

    def raw(self, n):
        return np.asarray(self._bg.random_raw(int(n)), dtype=np.uint64)

    def uniform(self, n):
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def integers(self, lo, hi, n):
        span = np.uint64(hi - lo + 1)
        return (self.raw(n) % span).astype(np.int64) + lo

    def normal(self, n):
        pairs = (int(n) + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)`` driven by one word per swap."""
        perm = np.arange(n)
        if n < 2:
            return perm
        words = self.raw(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(words[n - 1 - i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
