"""Counter-based random streams.

Every random number in the package is a pure function of
``(master_seed, purpose, replica_id, index, counter)``.  A stream key is
derived from the first four by chained SplitMix64 finalizers and the
``counter``-th 64-bit word of the stream is ``mix64(key + (counter+1)*G)``,
i.e. the SplitMix64 sequence seeded at ``key``, evaluated out of order.
Nothing is stateful, so replicas and particles can be generated in any
order, on any number of workers, with bit-identical results.

Normal variates use a 256-layer ziggurat on top of the 64-bit words; rare
rejections draw extra words from a sub-stream seeded by the first word, so
each ``(key, counter)`` still maps to exactly one normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import optional_njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S8 = np.uint64(8)
_S9 = np.uint64(9)
_ONE = np.uint64(1)
_LOW8 = np.uint64(0xFF)
_LOW52 = np.uint64(0x000FFFFFFFFFFFFF)
_INV53 = 1.0 / 9007199254740992.0

# stream purposes; distinct purposes never share a key
PURPOSE_NOISE = 0
PURPOSE_INIT = 1
PURPOSE_GAMMA = 2
PURPOSE_GAUSS = 3

ZIG_R = 3.6541528853610088
_ZIG_V = 0.00492867323399


def _ziggurat_tables():
    dn = ZIG_R
    tn = dn
    q = _ZIG_V / math.exp(-0.5 * dn * dn)
    m1 = 2.0 ** 52
    ki = np.zeros(256, dtype=np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    ki[0] = np.uint64(int((dn / q) * m1))
    wi[0] = q / m1
    wi[255] = dn / m1
    fi[0] = 1.0
    fi[255] = math.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn = math.sqrt(-2.0 * math.log(_ZIG_V / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = np.uint64(int((dn / tn) * m1))
        tn = dn
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / m1
    return ki, wi, fi


ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()


@optional_njit(inline="always")
def mix64(z):
    """SplitMix64 finalizer (a bijection on 64-bit words)."""
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@optional_njit(inline="always")
def stream_word(key, counter):
    return mix64(key + (counter + _ONE) * GOLDEN)


@optional_njit(inline="always")
def word_to_unit(w):
    """Top 53 bits of a word as a double in [0, 1)."""
    return float(np.int64(w >> _S11)) * _INV53


@optional_njit(inline="always")
def stream_uniform(key, counter):
    return word_to_unit(stream_word(key, counter))


@optional_njit(inline="always")
def stream_normal(key, counter):
    """Standard normal for ``(key, counter)`` by the ziggurat method."""
    a = stream_word(key, counter)
    sub = a
    k = np.uint64(0)
    while True:
        idx = a & _LOW8
        sign = (a >> _S8) & _ONE
        rabs = (a >> _S9) & _LOW52
        x = float(np.int64(rabs)) * ZIG_W[idx]
        if sign:
            x = -x
        if rabs < ZIG_K[idx]:
            return x
        k += _ONE
        b = mix64(sub + k * GOLDEN)
        if idx == 0:
            k += _ONE
            c = mix64(sub + k * GOLDEN)
            xx = -math.log1p(-word_to_unit(b)) / ZIG_R
            yy = -math.log1p(-word_to_unit(c))
            if yy + yy > xx * xx:
                return -(ZIG_R + xx) if sign else ZIG_R + xx
        elif (ZIG_F[idx - 1] - ZIG_F[idx]) * word_to_unit(b) + ZIG_F[idx] < math.exp(-0.5 * x * x):
            return x
        k += _ONE
        a = mix64(sub + k * GOLDEN)


# -- vectorized numpy versions ------------------------------------------------

def _u64(x):
    return np.asarray(x).astype(np.uint64)


def mix64_array(z):
    z = _u64(z)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def words(keys, counters):
    keys, counters = np.broadcast_arrays(_u64(keys), _u64(counters))
    with np.errstate(over="ignore"):
        return mix64_array(keys + (counters + _ONE) * GOLDEN)


def units(w):
    return (np.asarray(w, dtype=np.uint64) >> _S11).astype(np.float64) * _INV53


def uniforms(keys, counters):
    return units(words(keys, counters))


def exponentials(keys, counters, rate=1.0):
    return -np.log1p(-uniforms(keys, counters)) / rate


def _libm(fn, arr):
    # numpy's SIMD transcendentals can differ from libm in the last ulp;
    # the compiled twin calls libm, so the rare rejection branches do too
    return np.fromiter(map(fn, arr.tolist()), dtype=np.float64, count=arr.size)


def normals(keys, counters):
    """Vectorized twin of :func:`stream_normal` (same outputs)."""
    a = words(keys, counters)
    shape = a.shape
    a = a.ravel()
    sub = a.copy()
    k = np.zeros(a.shape, dtype=np.uint64)
    out = np.empty(a.shape)
    todo = np.arange(a.size)
    while todo.size:
        aa = a[todo]
        idx = (aa & _LOW8).astype(np.intp)
        sign = ((aa >> _S8) & _ONE).astype(bool)
        rabs = (aa >> _S9) & _LOW52
        x = rabs.astype(np.int64).astype(np.float64) * ZIG_W[idx]
        x[sign] = -x[sign]
        accept = rabs < ZIG_K[idx]
        done = np.zeros(todo.size, dtype=bool)
        out[todo[accept]] = x[accept]
        done |= accept
        rest = ~accept
        if rest.any():
            sel = todo[rest]
            k[sel] += _ONE
            with np.errstate(over="ignore"):
                b = mix64_array(sub[sel] + k[sel] * GOLDEN)
            idr = idx[rest]
            xr = x[rest]
            tail = idr == 0
            if tail.any():
                st = sel[tail]
                k[st] += _ONE
                with np.errstate(over="ignore"):
                    c = mix64_array(sub[st] + k[st] * GOLDEN)
                xx = -_libm(math.log1p, -units(b[tail])) / ZIG_R
                yy = -_libm(math.log1p, -units(c))
                ok = yy + yy > xx * xx
                val = np.where(sign[rest][tail], -(ZIG_R + xx), ZIG_R + xx)
                out[st[ok]] = val[ok]
                ridx = np.flatnonzero(rest)[tail]
                done[ridx[ok]] = True
            wedge = ~tail
            if wedge.any():
                iw = idr[wedge]
                xw = xr[wedge]
                ok = (ZIG_F[iw - 1] - ZIG_F[iw]) * units(b[wedge]) + ZIG_F[iw] < _libm(math.exp, -0.5 * xw * xw)
                sw = sel[wedge]
                out[sw[ok]] = xw[ok]
                ridx = np.flatnonzero(rest)[wedge]
                done[ridx[ok]] = True
        retry = todo[~done]
        if retry.size:
            k[retry] += _ONE
            with np.errstate(over="ignore"):
                a[retry] = mix64_array(sub[retry] + k[retry] * GOLDEN)
        todo = retry
    return out.reshape(shape)


@dataclass(frozen=True)
class RngSpec:
    """Master seed plus the stream-derivation rule.

    ``key(replica, index, purpose)`` names one independent stream; the
    ``counter`` argument of the draw helpers indexes within it (the step
    index for dynamics noise).
    """

    master_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            from .errors import ParameterError
            raise ParameterError("master_seed must fit in 64 unsigned bits")

    def keys(self, replica, index, purpose=PURPOSE_NOISE):
        """Stream keys, broadcasting ``replica`` against ``index``."""
        replica, index = np.broadcast_arrays(_u64(replica), _u64(index))
        seed = np.uint64(int(self.master_seed))
        with np.errstate(over="ignore"):
            k = mix64_array(np.full(replica.shape, seed) + np.uint64(purpose + 1) * GOLDEN)
            k = mix64_array(k + (replica + _ONE) * _M1)
            k = mix64_array(k ^ ((index + _ONE) * _M2))
        return k

    def key(self, replica=0, index=0, purpose=PURPOSE_NOISE):
        return np.uint64(self.keys(replica, index, purpose)[()])

    def uniform(self, replica, index, counter, purpose=PURPOSE_INIT):
        return uniforms(self.keys(replica, index, purpose), counter)

    def normal(self, replica, index, counter, purpose=PURPOSE_GAUSS):
        return normals(self.keys(replica, index, purpose), counter)

    def noise_keys(self, replica_ids, n_particles):
        """``(R, N)`` keys of the per-particle dynamics noise streams."""
        r = np.asarray(replica_ids, dtype=np.uint64)[:, None]
        i = np.arange(n_particles, dtype=np.uint64)[None, :]
        return self.keys(r, i, PURPOSE_NOISE)
