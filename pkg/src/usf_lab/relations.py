"""Random relations on Z^d, their composition, and stochastic dimension estimates.

A relation world is one sampled realization of a random relation, answering
``query(x, y)`` consistently.  Coin worlds (long-range percolation and the
deterministic stubs) flip a hashed coin per unordered pair, so they need no
memory at all.  Walk based worlds memoize one path per source point; the path
is a pure function of (world seed, source point), so evicting and rebuilding
it never changes an answer.  The USF world grows a single Wilson structure in
query order, so its answers depend on that order (and only on it).

The dimension estimator fits log P[x R z] against log <xz> by least squares.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import int64, njit, uint64

from . import _sites
from .lattice import Shell, as_point, l1_ball_points, l1_ball_size, span_distance
from .parallel import map_ranges
from .rng import MASK64, derive_seed, mix64, nb_below, nb_mix64, nb_next
from .spread import spread

DEFAULT_WINDOW_BUDGET = 1 << 26
DEFAULT_BOOTSTRAP = 1000
# per-axis multipliers of the linear point key
_AXIS = tuple(mix64(i + 1) | 1 for i in range(64))


def point_key(p: Sequence[int]) -> int:
    """Linear 64-bit key of a lattice point (sum of c_i * P_i mod 2**64)."""
    k = 0
    for i, c in enumerate(p):
        k += c * _AXIS[i]
    return k & MASK64


def pair_hash(salt: int, a: int, b: int) -> int:
    """Symmetric hash of two point keys: mix64(salt ^ (a + b) ^ rotl(a ^ b, 29))."""
    x = a ^ b
    rot = ((x << 29) | (x >> 35)) & MASK64
    return mix64(salt ^ ((a + b) & MASK64) ^ rot)


def coin_threshold(p: float) -> int:
    """Integer threshold T with (h >> 11) < T  iff  (h >> 11) * 2**-53 < p."""
    if p >= 1.0:
        return 1 << 53
    return math.ceil(p * 2.0**53) if p > 0 else 0


class RelationWorld:
    """One realization of a random relation on Z^d."""

    kind = "relation"
    symmetric = False

    def __init__(self, d: int, seed: int = 0, **params):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = d
        self.seed = seed & MASK64
        self.params = params
        self.frozen = False

    def freeze(self) -> "RelationWorld":
        """Forbid further lazy materialization; cached answers stay readable."""
        self.frozen = True
        return self

    def _check_mutable(self):
        if self.frozen:
            raise RuntimeError(f"{self.kind} world is frozen")

    def _points(self, x, y):
        x, y = as_point(x), as_point(y)
        if len(x) != self.d or len(y) != self.d:
            raise ValueError(f"points must lie in Z^{self.d}")
        return x, y

    def query(self, x: Sequence[int], y: Sequence[int]) -> bool:
        raise NotImplementedError

    def __repr__(self):
        extra = "".join(f", {k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}(d={self.d}, seed={self.seed}{extra})"


# ------------------------------------------------------------------ coin worlds

_THRESHOLDS: dict = {}


class CoinWorld(RelationWorld):
    """Independent pair coins with success probability ``prob(<xy>)``."""

    kind = "coin"
    symmetric = True

    def __init__(self, d: int, seed: int = 0, **params):
        super().__init__(d, seed, **params)
        self.salt = mix64(self.seed ^ 0x5851F42D4C957F2D)

    def prob(self, t: int) -> float:
        raise NotImplementedError

    def threshold_table(self, tmax: int) -> np.ndarray:
        """Integer coin thresholds for <xy> = 0..tmax (entry 0 unused)."""
        key = (type(self), tuple(sorted(self.params.items())))
        tab = _THRESHOLDS.get(key)
        if tab is None or tab.size <= tmax:
            tab = np.array([0] + [coin_threshold(self.prob(t)) for t in range(1, 2 * tmax + 1)],
                           dtype=np.uint64)
            _THRESHOLDS[key] = tab
        return tab

    def query(self, x, y) -> bool:
        x, y = self._points(x, y)
        if x == y:
            return True
        h = pair_hash(self.salt, point_key(x), point_key(y))
        return (h >> 11) < coin_threshold(self.prob(span_distance(x, y)))


class LRPWorld(CoinWorld):
    kind = "lrp"

    def __init__(self, d: int, alpha: float, seed: int = 0):
        if not 0 < alpha < d:
            raise ValueError(f"alpha must lie in (0, {d}), got {alpha}")
        super().__init__(d, seed, alpha=alpha)
        self.alpha = float(alpha)

    def prob(self, t: int) -> float:
        return float(t) ** -self.alpha


class FullWorld(CoinWorld):
    """Everything is related (the alpha -> 0 limit)."""

    kind = "full"

    def prob(self, t: int) -> float:
        return 1.0


class EmptyWorld(CoinWorld):
    """Only x R x."""

    kind = "empty"

    def prob(self, t: int) -> float:
        return 1.0 if t == 1 else 0.0


class ThresholdWorld(CoinWorld):
    """Deterministic: x R y iff <xy> <= r0."""

    kind = "threshold"

    def __init__(self, d: int, r0: int, seed: int = 0):
        super().__init__(d, seed, r0=r0)
        self.r0 = int(r0)

    def prob(self, t: int) -> float:
        return 1.0 if t <= self.r0 else 0.0


def lrp_world(d: int, alpha: float, seed: int = 0) -> LRPWorld:
    return LRPWorld(d, alpha, seed)


# --------------------------------------------------------- walk based worlds

@njit(cache=True)
def _walk_keys(d, radius, max_steps, seed, W):
    """Packed keys of the sites with l1 norm < radius on a walk from the origin."""
    cap = 1024
    keys = np.empty((cap, W), dtype=np.uint64)
    pos = np.zeros(d, dtype=np.int64)
    key = _sites.pack(pos, W)
    n = 0
    norm = 0
    steps = 0
    state = uint64(seed)
    while norm < radius:
        if n == cap:
            cap *= 2
            bigger = np.empty((cap, W), dtype=np.uint64)
            bigger[:n] = keys[:n]
            keys = bigger
        keys[n] = key
        n += 1
        if steps >= max_steps:
            break
        state, u = nb_next(state)
        k = nb_below(u, 2 * d)
        ax = k >> 1
        inc = uint64(1) << uint64(16 * (ax & 3))
        old = pos[ax]
        if k & 1:
            pos[ax] = old - 1
            key[ax >> 2] -= inc
            norm += -1 if old > 0 else 1
        else:
            pos[ax] = old + 1
            key[ax >> 2] += inc
            norm += 1 if old >= 0 else -1
        steps += 1
    return keys[:n]


@njit(cache=True)
def _key_table(keys, d):
    W = keys.shape[1]
    cap = 1024
    while cap * 0.5 < keys.shape[0]:
        cap *= 2
    tab = np.zeros((cap, W + 2), dtype=np.uint64)
    gen = uint64(1)
    for i in range(keys.shape[0]):
        h, found = _sites.find_slot(tab, gen, keys[i], W)
        if not found:
            _sites.store(tab, h, gen, keys[i], W, 1)
    return tab


@njit(cache=True)
def _walk_positions(d, steps, seed):
    out = np.zeros((steps + 1, d), dtype=np.int32)
    state = uint64(seed)
    for n in range(steps):
        state, u = nb_next(state)
        k = nb_below(u, 2 * d)
        out[n + 1] = out[n]
        out[n + 1, k >> 1] += -1 if k & 1 else 1
    return out


@njit(cache=True)
def _walk_visits(d, radius, max_steps, seed, target):
    """Does the walk from the origin visit ``target`` before leaving the ball?"""
    pos = np.zeros(d, dtype=np.int64)
    norm = 0
    steps = 0
    state = uint64(seed)
    while norm < radius:
        same = True
        for j in range(d):
            if pos[j] != target[j]:
                same = False
                break
        if same:
            return True
        if steps >= max_steps:
            return False
        state, u = nb_next(state)
        k = nb_below(u, 2 * d)
        ax = k >> 1
        old = pos[ax]
        if k & 1:
            pos[ax] = old - 1
            norm += -1 if old > 0 else 1
        else:
            pos[ax] = old + 1
            norm += 1 if old >= 0 else -1
        steps += 1
    return False


@njit(cache=True)
def _walks_meet(d, horizon, seed_x, seed_y, rel):
    """Do walks from 0 and ``rel`` share a site at some time <= horizon?"""
    diff = rel.copy()
    sx = uint64(seed_x)
    sy = uint64(seed_y)
    for n in range(horizon + 1):
        zero = True
        for j in range(d):
            if diff[j] != 0:
                zero = False
                break
        if zero:
            return True
        if n == horizon:
            break
        sx, u = nb_next(sx)
        k = nb_below(u, 2 * d)
        diff[k >> 1] -= -1 if k & 1 else 1
        sy, u = nb_next(sy)
        k = nb_below(u, 2 * d)
        diff[k >> 1] += -1 if k & 1 else 1
    return False


class _PathCache:
    """Memo of per-source paths with an optional LRU bound.

    A source's path is only stored once it is needed a second time; the first
    query runs a direct probe, which gives the same answer without the memory.
    """

    def __init__(self, limit: int | None):
        self.limit = limit
        self.data: OrderedDict = OrderedDict()
        self.seen: set = set()

    def cached(self, key) -> bool:
        return key in self.data

    def first_use(self, key) -> bool:
        """True the first time ``key`` is asked about (and records it)."""
        if key in self.data or key in self.seen:
            return False
        self.seen.add(key)
        return True

    def get(self, key, build: Callable):
        v = self.data.get(key)
        if v is not None:
            self.data.move_to_end(key)
            return v
        v = build()
        self.data[key] = v
        if self.limit is not None and len(self.data) > self.limit:
            self.data.popitem(last=False)
        return v


class WalkIntersectionWorld(RelationWorld):
    """x S y iff y lies on the walk from x, truncated at the l1 ball of ``radius``."""

    kind = "walk"

    def __init__(self, d: int, seed: int = 0, radius: int = 512, max_steps: int | None = None,
                 cache_limit: int | None = None):
        if d <= 2:
            raise ValueError("walk intersection needs d >= 3 (the walk is recurrent otherwise)")
        if not 1 <= radius <= _sites.MAX_RADIUS:
            raise ValueError(f"radius must lie in [1, {_sites.MAX_RADIUS}]")
        max_steps = 10 * radius * radius if max_steps is None else max_steps
        super().__init__(d, seed, radius=radius, max_steps=max_steps)
        self.radius, self.max_steps = radius, max_steps
        self._cache = _PathCache(cache_limit)
        self._W = _sites.key_words(d)

    def _stream(self, x: tuple) -> np.uint64:
        return np.uint64(derive_seed(self.seed, point_key(x)))

    def path_table(self, x: Sequence[int]) -> np.ndarray:
        x = as_point(x)

        def build():
            self._check_mutable()
            keys = _walk_keys(self.d, self.radius, self.max_steps, self._stream(x), self._W)
            return _key_table(keys, self.d)

        return self._cache.get(x, build)

    def query(self, x, y) -> bool:
        x, y = self._points(x, y)
        if x == y:
            return True
        rel = np.array(y, dtype=np.int64) - np.array(x, dtype=np.int64)
        if np.abs(rel).sum() >= self.radius:
            return False
        if self._cache.first_use(x) or (self.frozen and not self._cache.cached(x)):
            return _walk_visits(self.d, self.radius, self.max_steps, self._stream(x), rel)
        tab = self.path_table(x)
        return _sites.lookup(tab, np.uint64(1), _sites.pack(rel, self._W), self._W) >= 0


class MeetingWorld(RelationWorld):
    """x Q y iff the walks from x and y sit at the same site at a common time <= horizon."""

    kind = "meeting"
    symmetric = True

    def __init__(self, d: int, seed: int = 0, horizon: int = 1 << 16,
                 cache_limit: int | None = None):
        if d < 2:
            raise ValueError("the meeting relation needs d >= 2")
        super().__init__(d, seed, horizon=horizon)
        self.horizon = int(horizon)
        self._cache = _PathCache(cache_limit)

    def _stream(self, x: tuple) -> np.uint64:
        return np.uint64(derive_seed(self.seed, point_key(x)))

    def positions(self, x: Sequence[int]) -> np.ndarray:
        x = as_point(x)

        def build():
            self._check_mutable()
            rel = _walk_positions(self.d, self.horizon, self._stream(x))
            return rel.astype(np.int64) + np.array(x, dtype=np.int64)

        return self._cache.get(x, build)

    def query(self, x, y) -> bool:
        x, y = self._points(x, y)
        if x == y:
            return True
        if (span_distance(x, y) - 1) % 2:
            return False  # both walks step every tick, so the parity never matches
        fx, fy = self._cache.first_use(x), self._cache.first_use(y)
        cached = self._cache.cached(x) and self._cache.cached(y)
        if (fx and fy) or (self.frozen and not cached):
            rel = np.array(y, dtype=np.int64) - np.array(x, dtype=np.int64)
            return _walks_meet(self.d, self.horizon, self._stream(x), self._stream(y), rel)
        a, b = self.positions(x), self.positions(y)
        return bool((a == b).all(axis=1).any())


class USFWorld(RelationWorld):
    """USF connectivity from a persistent truncated Wilson construction.

    The ball of ``radius`` is centred at the first point ever queried.  Each
    new point runs one loop-erased walk with stream ``derive_seed(seed, j)``,
    j counting points in query order, exactly as the j-th walk of a trial in
    :func:`usf_lab.walk.sequence_components`.
    """

    kind = "usf"
    symmetric = True

    def __init__(self, d: int, seed: int = 0, radius: int = 256, max_steps: int | None = None):
        if d < 5:
            raise ValueError("the USF world needs d >= 5")
        if not 1 <= radius <= _sites.MAX_RADIUS:
            raise ValueError(f"radius must lie in [1, {_sites.MAX_RADIUS}]")
        max_steps = 10 * radius * radius if max_steps is None else max_steps
        super().__init__(d, seed, radius=radius, max_steps=max_steps)
        self.radius, self.max_steps = radius, max_steps
        self.center: tuple | None = None
        self.order: list[tuple] = []
        self.component: dict[tuple, int] = {}
        self.truncated = 0
        self._cap = max(1024, int(2 * math.pi * radius * radius / (2 * d)))
        self._alloc()

    def _alloc(self):
        W = _sites.key_words(self.d)
        self._struct = _sites.new_table(2 * self._cap, self.d)
        self._scratch = _sites.new_table(self._cap, self.d)
        self._stack = np.zeros((self._scratch.shape[0], W), dtype=np.uint64)
        self._n_struct = 0
        self._seg_comp: list[int] = []
        self._n_comp = 0

    def _walk(self, j: int, p: tuple) -> int:
        """Add point p as the j-th walk; component id, or -1 if a table overflowed."""
        rel = np.array(p, dtype=np.int64) - np.array(self.center, dtype=np.int64)
        if np.abs(rel).max() > _sites.MAX_RADIUS:
            c = self._n_comp  # unreachable by any walk inside the ball
            self._n_comp += 1
            self._seg_comp.append(c)
            return c
        st, hitv, top, _, _ = _sites.erasing_walk(
            rel, self.radius, self.max_steps, np.uint64(derive_seed(self.seed, j)), self._struct,
            np.uint64(1), self._n_struct > 0, self._scratch, np.uint64(j + 1), self._stack, True)
        if st == _sites.TABLE_FULL:
            return -1
        if st == _sites.TRUNCATED:
            self.truncated += 1
        if st == _sites.HIT:
            c = self._seg_comp[hitv]
            top -= 1
        else:
            c = self._n_comp
            self._n_comp += 1
        self._seg_comp.append(c)
        if top > 0:
            self._n_struct = _sites.struct_add(self._struct, np.uint64(1), self._stack, 0, top, j,
                                               self._n_struct)
            if self._n_struct < 0:
                return -1
        return c

    def _ensure(self, p: tuple):
        if p in self.component:
            return
        self._check_mutable()
        if self.center is None:
            self.center = p
        self.order.append(p)
        c = self._walk(len(self.order) - 1, p)
        while c < 0:
            # grow and replay every walk in the same order
            self._cap *= 2
            self._alloc()
            self.truncated = 0
            for j, q in enumerate(self.order):
                c = self._walk(j, q)
                if c < 0:
                    break
        self.component[p] = c

    def query(self, x, y) -> bool:
        x, y = self._points(x, y)
        if x == y:
            return True
        self._ensure(x)
        self._ensure(y)
        return self.component[x] == self.component[y]


def walk_intersection_world(d: int, seed: int = 0, **kw) -> WalkIntersectionWorld:
    return WalkIntersectionWorld(d, seed, **kw)


def meeting_world(d: int, seed: int = 0, **kw) -> MeetingWorld:
    return MeetingWorld(d, seed, **kw)


def usf_world(d: int, seed: int = 0, **kw) -> USFWorld:
    return USFWorld(d, seed, **kw)


# ----------------------------------------------------------------- composition

class ComposedWorld(RelationWorld):
    """x (LR) z searched over a window around x; see :func:`compose_query`."""

    kind = "composition"

    def __init__(self, L: RelationWorld, R: RelationWorld, window=None, restricted=False,
                 max_points: int = DEFAULT_WINDOW_BUDGET):
        if L.d != R.d:
            raise ValueError("composed worlds must share the dimension")
        super().__init__(L.d, L.seed, restricted=restricted)
        self.L, self.R = L, R
        self.window, self.restricted, self.max_points = window, restricted, max_points

    def query(self, x, z) -> bool:
        return compose_query(self.L, self.R, x, z, self.window, self.restricted,
                             self.max_points)


def default_window(x: Sequence[int], z: Sequence[int], width: int = 4) -> Shell:
    """Shells k = n .. n+width-1 around x with 2^n = 4<xz> rounded up."""
    n = math.ceil(math.log2(4 * span_distance(x, z)))
    return Shell(as_point(x), n, n + width)


@njit(inline="always", cache=True)
def _pair_hash(salt, a, b):
    x = a ^ b
    return nb_mix64(salt ^ (a + b) ^ ((x << uint64(29)) | (x >> uint64(35))))


@njit(cache=True)
def _run_count(salt, kx, ky, step, a0, a1, t0, thr):
    """L successes along y = ky + (a - a0) * step for a in [a0, a1], <xy> = t0 + a."""
    cnt = int64(0)
    for a in range(a0, a1 + 1):
        cnt += (_pair_hash(salt, kx, ky) >> uint64(11)) < thr[t0 + a]
        ky += step
    return cnt


@njit(cache=True)
def _shell_scan(mode, x, z, lo, hi, axis, salt_l, thr_l, salt_r, thr_r, restricted, hist):
    """Enumerate y with lo <= |y-x|_1 <= hi, row by row in the last coordinate.

    mode 0: return 1 at the first y with L(x,y) and R(y,z), else 0.
    mode 1: count such y.
    mode 2: add L(x,y) successes into ``hist`` by |y-x|_1 (R is ignored).
    Rows are first screened for L successes with a vectorizable count.
    """
    d = x.size
    m = d - 1
    kx = uint64(0)
    kz = uint64(0)
    xz = int64(1)
    for i in range(d):
        kx += uint64(x[i]) * axis[i]
        kz += uint64(z[i]) * axis[i]
        xz += abs(z[i] - x[i])
    step = axis[m]
    c = np.zeros(max(m, 1), dtype=np.int64)
    lim = np.zeros(max(m, 1), dtype=np.int64)
    y = np.zeros(d, dtype=np.int64)
    count = int64(0)
    if m > 0:
        lim[0] = hi
        c[0] = -hi
        s = abs(c[0])
        for j in range(1, m):
            lim[j] = hi - s
            c[j] = -lim[j]
            s += abs(c[j])
    while True:
        partial = int64(0)
        base = kx
        for j in range(m):
            partial += abs(c[j])
            y[j] = x[j] + c[j]
            base += uint64(c[j]) * axis[j]
        rem = hi - partial
        a0 = max(lo - partial, 0)
        for sgn in range(2):
            b0 = a0 if sgn == 0 else max(a0, 1)
            if b0 > rem:
                continue
            sstep = step if sgn == 0 else uint64(0) - step
            start = base + uint64(b0) * sstep
            if _run_count(salt_l, kx, start, sstep, b0, rem, 1 + partial, thr_l) == 0:
                continue
            ky = start
            for a in range(b0, rem + 1):
                txy = 1 + partial + a
                hit = (_pair_hash(salt_l, kx, ky) >> uint64(11)) < thr_l[txy]
                if hit:
                    if mode == 2:
                        hist[txy - 1] += 1
                    else:
                        y[m] = x[m] + (a if sgn == 0 else -a)
                        tyz = int64(1)
                        for i in range(d):
                            tyz += abs(z[i] - y[i])
                        ok = not restricted or (txy >= xz and tyz >= xz)
                        if ok and (_pair_hash(salt_r, ky, kz) >> uint64(11)) < thr_r[tyz]:
                            if mode == 0:
                                return 1
                            count += 1
                ky += sstep
        j = m - 1
        while j >= 0 and c[j] == lim[j]:
            j -= 1
        if j < 0:
            break
        c[j] += 1
        s = int64(0)
        for i in range(j + 1):
            s += abs(c[i])
        for k in range(j + 1, m):
            lim[k] = hi - s
            c[k] = -lim[k]
            s += abs(c[k])
    return count


_AXIS_ARR = np.array(_AXIS, dtype=np.uint64)


def _coin_scan(mode, L: CoinWorld, R: CoinWorld, x, z, lo, hi, restricted=False):
    d = len(x)
    xz = span_distance(x, z)
    tmax = hi + xz + 2
    xa = np.array(x, dtype=np.int64)
    za = np.array(z, dtype=np.int64)
    hist = np.zeros(hi + 1, dtype=np.int64)
    res = _shell_scan(mode, xa, za, lo, hi, _AXIS_ARR[:d], np.uint64(L.salt),
                      L.threshold_table(tmax), np.uint64(R.salt), R.threshold_table(tmax),
                      restricted, hist)
    return hist if mode == 2 else int(res)


def _window_size(d: int, lo: int, hi: int) -> int:
    return l1_ball_size(d, hi) - l1_ball_size(d, lo - 1)


def _resolve_window(x, z, window, restricted):
    """(lo, hi) radii of a shell window, or an explicit point array."""
    if window is None:
        window = default_window(x, z)
    elif isinstance(window, tuple) and len(window) == 2 and all(isinstance(v, int) for v in window):
        window = Shell(x, *window)
    if isinstance(window, Shell):
        if window.center != x:
            raise ValueError("shell windows must be centred at x")
        if restricted and not 2**window.n > 2 * span_distance(x, z):
            raise ValueError(f"restricted composition needs 2^n > 2<xz> = {2 * span_distance(x, z)}")
        return window.radii(), None
    pts = np.asarray(window, dtype=np.int64).reshape(-1, len(x))
    return None, pts


def compose_query(L: RelationWorld, R: RelationWorld, x: Sequence[int], z: Sequence[int],
                  window=None, restricted: bool = False,
                  max_points: int = DEFAULT_WINDOW_BUDGET) -> bool:
    """Is there a witness y in the window with x L y and y R z?

    ``window`` is a :class:`Shell` centred at x, a pair (n, N) meaning
    H_n^N(x), an explicit array of candidate points, or None for the default
    shells.  False only means that no witness was found in the window.
    With ``restricted`` the witness must also satisfy <xz> <= min(<xy>, <yz>).
    """
    x, z = as_point(x), as_point(z)
    if len(x) != L.d or len(z) != L.d or R.d != L.d:
        raise ValueError("dimension mismatch")
    radii, pts = _resolve_window(x, z, window, restricted)
    if pts is not None:
        if len(pts) > max_points:
            raise ValueError(f"window of {len(pts)} points exceeds the budget of {max_points}")
        return _generic_witnesses(L, R, x, z, pts, restricted, first=True) > 0
    lo, hi = radii
    size = _window_size(len(x), lo, hi)
    if size > max_points:
        raise ValueError(f"window of {size} points exceeds the budget of {max_points}")
    if isinstance(L, CoinWorld) and isinstance(R, CoinWorld):
        return _coin_scan(0, L, R, x, z, lo, hi, restricted) > 0
    return _generic_witnesses(L, R, x, z, _shell_array(len(x), x, lo, hi), restricted,
                              first=True) > 0


def _shell_array(d, x, lo, hi):
    ball = l1_ball_points(d, hi)
    ball = ball[np.abs(ball).sum(axis=1) >= lo]
    return ball + np.array(x, dtype=np.int64)


def _generic_witnesses(L, R, x, z, pts, restricted, first) -> int:
    xz = span_distance(x, z)
    count = 0
    for row in pts:
        y = tuple(int(c) for c in row)
        if restricted and (span_distance(x, y) < xz or span_distance(y, z) < xz):
            continue
        if L.query(x, y) and R.query(y, z):
            count += 1
            if first:
                return 1
    return count


def count_shell_witnesses(L: RelationWorld, R: RelationWorld, u: Sequence[int],
                          z: Sequence[int], n: int, N: int,
                          max_points: int = DEFAULT_WINDOW_BUDGET) -> int:
    """Number of x in H_n^{N+1}(u) with u L x and x R z."""
    u, z = as_point(u), as_point(z)
    uz = span_distance(u, z)
    if not uz < 2 ** (n - 1):
        raise ValueError(f"need <uz> < 2^(n-1) = {2 ** (n - 1)}, got <uz> = {uz}")
    if N < n:
        return 0
    lo, hi = Shell(u, n, N + 1).radii()
    size = _window_size(len(u), lo, hi)
    if size > max_points:
        raise ValueError(f"shell of {size} points exceeds the budget of {max_points}")
    if isinstance(L, CoinWorld) and isinstance(R, CoinWorld):
        return _coin_scan(1, L, R, u, z, lo, hi)
    return _generic_witnesses(L, R, u, z, _shell_array(len(u), u, lo, hi), False, first=False)


# ------------------------------------------------------------------ factories

_KINDS = {
    "lrp": LRPWorld,
    "walk": WalkIntersectionWorld,
    "meeting": MeetingWorld,
    "usf": USFWorld,
    "full": FullWorld,
    "empty": EmptyWorld,
    "threshold": ThresholdWorld,
}


@dataclass(frozen=True)
class WorldFactory:
    """Picklable recipe ``seed -> world``; ``kind`` 'composition' takes ``left``/``right``."""

    kind: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind != "composition" and self.kind not in _KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if self.kind == "composition":
            for side in ("left", "right"):
                if not isinstance(self.params.get(side), WorldFactory):
                    raise ValueError(f"composition needs a '{side}' factory")

    def __call__(self, seed: int) -> RelationWorld:
        if self.kind == "composition":
            p = dict(self.params)
            L = p.pop("left")(derive_seed(seed, 0))
            R = p.pop("right")(derive_seed(seed, 1))
            return ComposedWorld(L, R, **p)
        return _KINDS[self.kind](self.d, seed=seed, **self.params)


# --------------------------------------------------------------- estimation

@dataclass
class DimensionFit:
    distances: list
    estimates: list
    stderrs: list
    successes: list
    trials: list
    excluded: list
    slope: float
    intercept: float
    fitted_exponent: float
    stochastic_dimension_estimate: float
    ci_halfwidth: float
    d: int

    def rows(self):
        return list(zip(self.distances, self.estimates, self.stderrs, self.trials))


def _ls_slope(logt: np.ndarray, logp: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(logt, logp, 1)
    return float(slope), float(intercept)


def _hits_range(factory, pairs, seed, trials, first, lo, hi):
    out = np.zeros((hi - lo, len(pairs)), dtype=bool)
    for r, (x, z) in enumerate(pairs):
        base = first + r * trials
        for i in range(lo, hi):
            out[i - lo, r] = factory(derive_seed(seed, base + i)).query(x, z)
    return out


def relation_hits(factory: Callable, pairs: Sequence, trials: int, seed: int = 0,
                  workers: int | None = 1, first_trial: int = 0) -> np.ndarray:
    """(trials, len(pairs)) booleans, one fresh world per entry.

    Pair r in trial i queries the world with seed
    ``derive_seed(seed, first_trial + r * trials + i)``.
    """
    pairs = [(as_point(x), as_point(z)) for x, z in pairs]
    parts = map_ranges(_hits_range, trials, workers, (factory, pairs, seed, trials, first_trial))
    return np.concatenate(parts)


def fit_from_counts(distances, successes, trials, d: int, bootstrap: int = DEFAULT_BOOTSTRAP,
                    seed: int = 0) -> DimensionFit:
    """Least-squares power-law fit of success frequencies against <xz>."""
    t = np.asarray(distances, dtype=float)
    s = np.asarray(successes, dtype=np.int64)
    n = np.asarray(trials, dtype=np.int64)
    p = s / n
    se = np.sqrt(p * (1 - p) / n)
    keep = s > 0
    if keep.sum() < 3:
        raise ValueError("insufficient signal: fewer than 3 rungs with a success")
    slope, intercept = _ls_slope(np.log(t[keep]), np.log(p[keep]))
    half = float("nan")
    if bootstrap:
        rng = np.random.default_rng(seed)
        sims = rng.binomial(n[keep], p[keep], size=(bootstrap, int(keep.sum()))) / n[keep]
        lt = np.log(t[keep])
        slopes = []
        for row in sims:
            ok = row > 0
            if ok.sum() >= 3:
                slopes.append(_ls_slope(lt[ok], np.log(row[ok]))[0])
        if slopes:
            lo, hi = np.percentile(slopes, [2.5, 97.5])
            half = float(hi - lo) / 2
    alpha = max(0.0, -slope)
    return DimensionFit(
        distances=[int(v) for v in distances], estimates=p.tolist(), stderrs=se.tolist(),
        successes=s.tolist(), trials=n.tolist(),
        excluded=[int(v) for v, k in zip(distances, keep) if not k],
        slope=slope, intercept=intercept, fitted_exponent=alpha,
        stochastic_dimension_estimate=d - alpha, ci_halfwidth=half, d=d)


def fit_dimension(factory: Callable, ladder: Sequence, trials: int, seed: int = 0,
                  bootstrap: int = DEFAULT_BOOTSTRAP, workers: int | None = 1,
                  d: int | None = None, first_trial: int = 0) -> DimensionFit:
    """Fit P[x R z] ~ <xz>^-alpha over a ladder of pairs, one fresh world per query."""
    ladder = [(as_point(x), as_point(z)) for x, z in ladder]
    if d is None:
        d = len(ladder[0][0])
    hits = relation_hits(factory, ladder, trials, seed, workers, first_trial)
    dist = [span_distance(x, z) for x, z in ladder]
    return fit_from_counts(dist, hits.sum(axis=0), [trials] * len(ladder), d, bootstrap,
                           derive_seed(seed, 1 << 32))


def axis_ladder(d: int, distances: Sequence[int]) -> list:
    """Pairs (0, (t-1) e_1) with <xz> = t."""
    o = (0,) * d
    return [(o, (t - 1,) + (0,) * (d - 1)) for t in distances]


@dataclass
class CorrelationReport:
    quadruples: list
    joint: list
    stderr: list
    denominators: list
    ratios: list
    alpha_hat: float

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)


def _joint_range(factory, quads, seed, trials, first, lo, hi):
    out = np.zeros((hi - lo, len(quads)), dtype=bool)
    for q, (x, z, y, w) in enumerate(quads):
        base = first + q * trials
        for i in range(lo, hi):
            world = factory(derive_seed(seed, base + i))
            out[i - lo, q] = world.query(x, z) and world.query(y, w)
    return out


def correlation_diagnostic(factory: Callable, quadruples: Sequence, trials: int,
                           alpha_hat: float, seed: int = 0, workers: int | None = 1,
                           first_trial: int = 0) -> CorrelationReport:
    """Ratios P[xRz, yRw] / (<xz>^-a <yw>^-a + <xzyw>^-a) with a = ``alpha_hat``."""
    quads = [tuple(as_point(p) for p in q) for q in quadruples]
    hits = np.concatenate(map_ranges(_joint_range, trials, workers,
                                     (factory, quads, seed, trials, first_trial)))
    p = hits.mean(axis=0)
    se = np.sqrt(p * (1 - p) / trials)
    dens, ratios = [], []
    for (x, z, y, w), pj in zip(quads, p):
        den = (span_distance(x, z) * span_distance(y, w)) ** -alpha_hat \
            + spread([x, z, y, w]).exact_value ** -alpha_hat
        dens.append(den)
        ratios.append(float(pj) / den)
    return CorrelationReport(quads, p.tolist(), se.tolist(), dens, ratios, alpha_hat)


@dataclass
class GrowthReport:
    radii: list
    counts: np.ndarray  # (worlds, len(radii)) values of eta_n
    slopes: np.ndarray  # per-world least-squares slope of log eta_n vs log n

    @property
    def mean_counts(self) -> np.ndarray:
        return self.counts.mean(axis=0)

    @property
    def exponent(self) -> float:
        return float(self.slopes.mean())

    @property
    def mean_count_exponent(self) -> float:
        return _ls_slope(np.log(self.radii), np.log(self.mean_counts))[0]

    def quantiles(self, qs=(0.5, 0.9, 0.99)) -> dict:
        return {q: float(np.quantile(self.slopes, q)) for q in qs}


def _growth_range(factory, radii, origin, seed, lo, hi):
    rmax = max(radii)
    d = len(origin)
    out = np.zeros((hi - lo, len(radii)), dtype=np.int64)
    pts = None
    for i in range(lo, hi):
        world = factory(derive_seed(seed, i))
        if isinstance(world, CoinWorld):
            lo_r, hi_r = 0, rmax - 1
            hist = _coin_scan(2, world, world, origin, origin, lo_r, hi_r)
            cum = np.cumsum(hist)  # cum[k] = #{related z : |z-o| <= k}
            out[i - lo] = [cum[r - 1] for r in radii]
        else:
            if pts is None:
                pts = l1_ball_points(d, rmax - 1)
                norms = np.abs(pts).sum(axis=1)
                pts = pts + np.array(origin, dtype=np.int64)
            rel = np.array([world.query(origin, tuple(int(c) for c in p)) for p in pts])
            out[i - lo] = [int(rel[norms < r].sum()) for r in radii]
    return out


def growth_exponent(factory: Callable, radii: Sequence[int], trials: int, seed: int = 0,
                    origin: Sequence[int] | None = None, workers: int | None = 1,
                    d: int | None = None, first_trial: int = 0) -> GrowthReport:
    """eta_n = #{z : |z - o|_1 < n, o R z} per world, and the log-log slope in n."""
    radii = sorted(int(r) for r in radii)
    if radii[0] < 1:
        raise ValueError("radii must be >= 1")
    if origin is None:
        if d is None:
            d = factory.d
        origin = (0,) * d
    origin = as_point(origin)
    counts = np.concatenate(map_ranges(_growth_range, trials, workers,
                                       (factory, radii, origin, seed), offset=first_trial))
    logn = np.log(radii)
    if len(radii) > 1:
        slopes = np.polyfit(logn, np.log(counts.T), 1)[0]
    else:
        slopes = np.full(counts.shape[0], np.nan)
    return GrowthReport(radii, counts, np.asarray(slopes))
