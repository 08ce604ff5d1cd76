"""Two-piece continuous affine maps, word compositions and periodic solutions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .symbolic import LEFT, SymbolWord, rotation_of_itinerary, shift

# Tolerances used throughout; see the decisions notes for how they were chosen.
TAU_ADM = 1e-9
TAU_SING = 1e-12
COND_MAX = 1e12


class SingularCycleError(ArithmeticError):
    """Raised when I - M_W is numerically singular (a periodicity boundary)."""


@dataclass(frozen=True)
class AffinePair:
    A_L: np.ndarray
    A_R: np.ndarray
    B: np.ndarray

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    def matrix(self, symbol: str) -> np.ndarray:
        return self.A_L if symbol == LEFT else self.A_R

    def is_continuous(self, tol: float = 0.0) -> bool:
        diff = self.A_R - self.A_L
        return bool(np.all(np.abs(diff[:, 1:]) <= tol))


def bcnf3(tau_L, sigma_L, delta_L, tau_R, sigma_R, delta_R, mu=1.0) -> AffinePair:
    """Three-dimensional border-collision normal form in companion form."""
    A_L = np.array([[tau_L, 1.0, 0.0], [-sigma_L, 0.0, 1.0], [delta_L, 0.0, 0.0]])
    A_R = np.array([[tau_R, 1.0, 0.0], [-sigma_R, 0.0, 1.0], [delta_R, 0.0, 0.0]])
    B = np.array([mu, 0.0, 0.0])
    return AffinePair(A_L, A_R, B)


@dataclass(frozen=True)
class ParamSlice:
    """A two-parameter family xi -> AffinePair."""

    name: str
    names: tuple[str, str]
    evaluator: Callable[[float, float], AffinePair]
    fixed: dict = field(default_factory=dict)

    def __call__(self, xi) -> AffinePair:
        return self.evaluator(float(xi[0]), float(xi[1]))


def _fig1_slice(tau_R: float, delta_L: float) -> AffinePair:
    return bcnf3(0.0, -1.0, delta_L, tau_R, 0.0, 2.0, 1.0)


SLICES = {
    "bcnf3-fig1": ParamSlice(
        "bcnf3-fig1",
        ("tau_R", "delta_L"),
        _fig1_slice,
        {"tau_L": 0.0, "sigma_L": -1.0, "sigma_R": 0.0, "delta_R": 2.0, "mu": 1.0},
    ),
}


def get_slice(name: str) -> ParamSlice:
    try:
        return SLICES[name]
    except KeyError:
        raise KeyError(f"unknown slice {name!r}; known: {sorted(SLICES)}") from None


def step(f: AffinePair, x: np.ndarray) -> np.ndarray:
    A = f.A_L if x[0] <= 0 else f.A_R
    return A @ x + f.B


def word_matrices(f: AffinePair, w) -> tuple[np.ndarray, np.ndarray]:
    """Return (M_W, P_W) such that f^W(x) = M_W x + P_W B."""
    N = f.dim
    eye = np.eye(N)
    M = eye.copy()
    P = np.zeros((N, N))
    for c in str(w):
        A = f.A_L if c == LEFT else f.A_R
        M = A @ M
        P = A @ P + eye
    return M, P


def word_apply(f: AffinePair, w, x: np.ndarray) -> np.ndarray:
    """Apply the affine pieces in the order given by w, ignoring the sign of s."""
    for c in str(w):
        x = (f.A_L if c == LEFT else f.A_R) @ x + f.B
    return x


@dataclass
class Cycle:
    word: SymbolWord
    points: np.ndarray
    multipliers: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def period(self) -> int:
        return len(self.word)


def periodic_point(f: AffinePair, w) -> np.ndarray:
    """Fixed point of f^W, refusing near-singular systems."""
    M, P = word_matrices(f, w)
    K = np.eye(f.dim) - M
    scale = max(1.0, np.linalg.norm(M))
    if abs(np.linalg.det(K)) < TAU_SING * scale or np.linalg.cond(K) > COND_MAX:
        raise SingularCycleError(f"I - M_W singular for word {w}")
    return np.linalg.solve(K, P @ f.B)


def cycle(f: AffinePair, w) -> Cycle:
    """All n points of the W-cycle; x_i is the fixed point of the i-th shift."""
    w = w if isinstance(w, SymbolWord) else SymbolWord(str(w))
    x0 = periodic_point(f, w)
    pts = [x0]
    x = x0
    for c in str(w)[:-1]:
        x = f.matrix(c) @ x + f.B
        pts.append(x)
    pts = np.array(pts)
    # re-solve each point directly so every point is accurate on its own
    for i in range(1, len(w)):
        pts[i] = periodic_point(f, shift(w, i))
    M, _ = word_matrices(f, w)
    return Cycle(w, pts, np.linalg.eigvals(M))


def cycle_residual(f: AffinePair, c: Cycle) -> float:
    n = c.period
    res = 0.0
    for i in range(n):
        nxt = f.matrix(c.word[i]) @ c.points[i] + f.B
        res = max(res, float(np.linalg.norm(nxt - c.points[(i + 1) % n])))
    return res


def admissible(c: Cycle, tau_adm: float = TAU_ADM) -> bool:
    for sym, s in zip(str(c.word), c.s):
        if sym == LEFT and s > tau_adm:
            return False
        if sym != LEFT and s < -tau_adm:
            return False
    return True


def stability(f: AffinePair, w) -> tuple[np.ndarray, bool]:
    M, _ = word_matrices(f, w)
    mult = np.linalg.eigvals(M)
    return mult, bool(np.all(np.abs(mult) < 1))


@dataclass
class OrbitReport:
    status: str  # "periodic", "aperiodic" or "divergent"
    period: int | None = None
    itinerary: str | None = None
    rotation: tuple[int, int, int] | None = None  # (l, m, p) when rotational

    @property
    def rotation_number(self) -> float | None:
        if self.rotation is None:
            return None
        _, m, p = self.rotation
        return m / p


def iterate_detect(
    f: AffinePair,
    x0=None,
    n_transient: int = 20000,
    n_max: int = 100000,
    p_max: int = 200,
    bound: float = 1e8,
) -> OrbitReport:
    """Iterate, discard a transient, then look for the least period p <= p_max.

    A period is accepted when ||x_{i+p} - x_i|| < 1e-8 (1 + ||x_i||) holds for
    every i in a window of 2 p_max points.
    """
    if n_max < n_transient:
        raise ValueError("n_max must be at least n_transient")
    x = np.zeros(f.dim) if x0 is None else np.asarray(x0, float).copy()
    A_L, A_R, B = f.A_L, f.A_R, f.B
    window = 2 * p_max
    for _ in range(n_transient):
        x = (A_L if x[0] <= 0 else A_R) @ x + B
        if not np.all(np.isfinite(x)) or np.abs(x).max() > bound:
            return OrbitReport("divergent")
    # after the transient, test in blocks until n_max is reached
    done = n_transient
    while done < n_max:
        pts = np.empty((window + p_max, f.dim))
        for i in range(window + p_max):
            pts[i] = x
            x = (A_L if x[0] <= 0 else A_R) @ x + B
        done += window + p_max
        if not np.all(np.isfinite(pts)) or np.abs(pts).max() > bound:
            return OrbitReport("divergent")
        scale = 1e-8 * (1.0 + np.linalg.norm(pts, axis=1))
        for p in range(1, p_max + 1):
            gap = np.linalg.norm(pts[p:p + window] - pts[:window], axis=1)
            if np.all(gap < scale[:window]):
                itin = "".join(LEFT if s <= 0 else "R" for s in pts[:p, 0])
                return OrbitReport("periodic", p, itin, rotation_of_itinerary(itin))
    return OrbitReport("aperiodic")


def rotational_cycle_ok(f: AffinePair, w: SymbolWord) -> tuple[bool, bool]:
    """(admissible, attracting) for the w-cycle; singular systems count as absent."""
    try:
        c = cycle(f, w)
    except SingularCycleError:
        return False, False
    return admissible(c), bool(np.all(np.abs(c.multipliers) < 1))


# ---------------------------------------------------------------------------
# grid scans (vectorised over cells)


@dataclass
class ScanGrid:
    """Per-cell mode-locking labels over a rectangular parameter grid.

    Arrays are indexed [row, col] with rows following ``y`` and columns ``x``.
    ``period`` is 0 where nothing was detected; ``l``, ``m`` are 0 for
    non-rotational or empty cells.
    """

    x: np.ndarray
    y: np.ndarray
    period: np.ndarray
    l: np.ndarray
    m: np.ndarray
    stable: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.period.shape

    def rotation(self) -> np.ndarray:
        out = np.full(self.period.shape, np.nan)
        ok = (self.period > 0) & (self.m > 0)
        out[ok] = self.m[ok] / self.period[ok]
        return out

    def labels(self) -> set[str]:
        ok = (self.period > 0) & (self.m > 0)
        return {f"{m}/{p}" for m, p in zip(self.m[ok], self.period[ok])}


def _batch_maps(pslice: ParamSlice, xs: np.ndarray, ys: np.ndarray):
    pairs = [pslice((x, y)) for x, y in zip(xs, ys)]
    AL = np.stack([p.A_L for p in pairs])
    AR = np.stack([p.A_R for p in pairs])
    B = np.stack([p.B for p in pairs])
    return AL, AR, B


def _batch_word(AL, AR, B, w: str, with_P: bool = True):
    n_cells, N, _ = AL.shape
    eye = np.broadcast_to(np.eye(N), AL.shape)
    M = eye.copy()
    P = np.zeros_like(AL) if with_P else None
    for c in w:
        A = AL if c == LEFT else AR
        M = A @ M
        if with_P:
            P = A @ P + eye
    return M, P


class _BlockProducts:
    """Matrix products of every word of length <= ``size`` for a batch of maps.

    A longer word is then multiplied out block by block, which cuts the number
    of batched matrix products by roughly a factor ``size``.
    """

    def __init__(self, AL: np.ndarray, AR: np.ndarray, size: int = 6):
        self.size = size
        self.table = {"": np.broadcast_to(np.eye(AL.shape[-1]), AL.shape).copy()}
        level = [""]
        for _ in range(size):
            nxt = []
            for w in level:
                for c, A in ((LEFT, AL), ("R", AR)):
                    self.table[w + c] = A @ self.table[w]
                    nxt.append(w + c)
            level = nxt

    def product(self, w: str) -> np.ndarray:
        M = self.table[w[: self.size]]
        for i in range(self.size, len(w), self.size):
            M = self.table[w[i: i + self.size]] @ M
        return M


def _schur_stable(M: np.ndarray) -> np.ndarray:
    """All eigenvalues strictly inside the unit circle, per matrix in the batch.

    For 3x3 matrices this is the Jury test on the characteristic polynomial
    (exact and much cheaper than eigenvalues); other sizes use eigenvalues.
    """
    if M.shape[-1] != 3:
        return np.all(np.abs(np.linalg.eigvals(M)) < 1, axis=1)
    tr = np.trace(M, axis1=1, axis2=2)
    minors = (M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
              + M[:, 0, 0] * M[:, 2, 2] - M[:, 0, 2] * M[:, 2, 0]
              + M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1])
    det = np.linalg.det(M)
    # lambda^3 + a2 lambda^2 + a1 lambda + a0
    a2, a1, a0 = -tr, minors, -det
    return ((np.abs(a0) < 1) & (1 + a2 + a1 + a0 > 0) & (1 - a2 + a1 - a0 > 0)
            & (np.abs(a0 * a0 - 1) > np.abs(a0 * a2 - a1)))


def rotational_words(p_max: int):
    """All rotational words F[l, m, p] with 2 <= p <= p_max, ordered by period."""
    from math import gcd

    from .symbolic import rotational_word

    for p in range(2, p_max + 1):
        seen = set()
        for m in range(1, p):
            if gcd(m, p) != 1:
                continue
            for l in range(1, p):
                w = str(rotational_word(l, m, p))
                # one representative per cycle: the smallest m wins
                canon = min(w[i:] + w[:i] for i in range(p))
                if canon in seen:
                    continue
                seen.add(canon)
                yield l, m, p, w


def _cycle_solve_cells(pslice, xs, ys, p_max):
    AL, AR, B = _batch_maps(pslice, xs, ys)
    n_cells, N, _ = AL.shape
    best = np.zeros((n_cells, 3), dtype=int)
    eye = np.eye(N)
    detL = np.linalg.det(AL)
    detR = np.linalg.det(AR)
    blocks = _BlockProducts(AL, AR)
    with np.errstate(all="ignore"):
        for l, m, p, w in rotational_words(p_max):
            # the multiplier product must be below one in modulus for stability
            dets = np.abs(detL) ** l * np.abs(detR) ** (p - l)
            cand = dets < 1
            if not cand.any():
                continue
            idx = np.nonzero(cand)[0]
            M = blocks.product(w)[idx]
            stable = _schur_stable(M)
            if not stable.any():
                continue
            idx = idx[stable]
            M, P = _batch_word(AL[idx], AR[idx], B[idx], w)
            K = eye - M
            regular = np.abs(np.linalg.det(K)) > TAU_SING
            idx, K, P = idx[regular], K[regular], P[regular]
            if len(idx) == 0:
                continue
            x = np.linalg.solve(K, P @ B[idx][:, :, None])[:, :, 0]
            ok = np.ones(len(idx), bool)
            for c in w:
                s = x[:, 0]
                ok &= (s <= TAU_ADM) if c == LEFT else (s >= -TAU_ADM)
                A = AL[idx] if c == LEFT else AR[idx]
                x = (A @ x[:, :, None])[:, :, 0] + B[idx]
            hit = idx[ok]
            # highest period wins; later words have period >= earlier ones
            best[hit] = (p, l, m)
    return best


def _orbit_cells(pslice, xs, ys, n_transient, n_max, p_max):
    AL, AR, B = _batch_maps(pslice, xs, ys)
    n_cells, N, _ = AL.shape
    x = np.zeros((n_cells, N))
    alive = np.ones(n_cells, bool)
    window = 2 * p_max
    keep = window + p_max
    with np.errstate(all="ignore"):
        for _ in range(n_transient):
            left = x[:, 0] <= 0
            A = np.where(left[:, None, None], AL, AR)
            x = (A @ x[:, :, None])[:, :, 0] + B
        tail = np.empty((keep, n_cells, N))
        for i in range(keep):
            tail[i] = x
            left = x[:, 0] <= 0
            A = np.where(left[:, None, None], AL, AR)
            x = (A @ x[:, :, None])[:, :, 0] + B
    alive &= np.all(np.isfinite(tail), axis=(0, 2)) & (np.abs(np.nan_to_num(tail, nan=1e300)).max(axis=(0, 2)) < 1e8)
    out = np.zeros((n_cells, 3), dtype=int)
    found = np.zeros(n_cells, bool)
    tail = np.where(alive[None, :, None], tail, 0.0)
    scale = 1e-8 * (1.0 + np.linalg.norm(tail[:window], axis=2))
    for p in range(1, p_max + 1):
        gap = np.linalg.norm(tail[p:p + window] - tail[:window], axis=2)
        hit = alive & ~found & np.all(gap < scale, axis=0)
        for c in np.nonzero(hit)[0]:
            itin = "".join(LEFT if s <= 0 else "R" for s in tail[:p, c, 0])
            rot = rotation_of_itinerary(itin)
            out[c] = (p, rot[0], rot[1]) if rot else (p, 0, 0)
        found |= hit
    return out


def _scan_rows(args):
    """Label a block of rows; all its cells go through the word loop as one batch."""
    name, xs, ys_rows, mode, opts = args
    pslice = get_slice(name)
    xx = np.tile(xs, len(ys_rows))
    yy = np.repeat(np.asarray(ys_rows, float), len(xs))
    if mode == "cycle-solve":
        cells = _cycle_solve_cells(pslice, xx, yy, opts.get("p_max", 50))
    else:
        cells = _orbit_cells(pslice, xx, yy, opts.get("n_transient", 20000), opts.get("n_max", 100000),
                             opts.get("p_max", 200))
    return list(cells.reshape(len(ys_rows), len(xs), -1))


def mode_lock_scan(slice_name: str, x_axis, y_axis, mode: str = "cycle-solve", threads: int = 1, **opts) -> ScanGrid:
    """Label every grid cell with its attracting rotational periodic solution.

    ``cycle-solve`` keeps the highest-period admissible attracting rotational
    cycle up to ``p_max``; ``orbit`` iterates from the origin and detects the
    period of the attractor. Rows are split into contiguous blocks, one batch
    per block, and reassembled in row order.
    """
    if mode not in ("cycle-solve", "orbit"):
        raise ValueError(f"unknown scan mode {mode!r}")
    x_axis = np.asarray(x_axis, float)
    y_axis = np.asarray(y_axis, float)
    if np.any(np.diff(x_axis) <= 0) or np.any(np.diff(y_axis) <= 0):
        raise ValueError("grid axes must be strictly increasing")
    n_blocks = min(len(y_axis), max(1, threads) * 2 if threads > 1 else 1)
    blocks = [b for b in np.array_split(y_axis, n_blocks) if len(b)]
    jobs = [(slice_name, x_axis, list(b), mode, opts) for b in blocks]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = [r for block in pool.map(_scan_rows, jobs) for r in block]
    else:
        rows = [r for j in jobs for r in _scan_rows(j)]
    arr = np.stack(rows)  # (ny, nx, 3)
    period, l, m = arr[..., 0], arr[..., 1], arr[..., 2]
    stable = period > 0
    meta = {"slice": slice_name, "mode": mode, **{k: v for k, v in opts.items()}}
    return ScanGrid(x_axis, y_axis, period, l, m, stable, meta)
