"""The skew sawtooth circle map: iteration, lift, rotation numbers, tongues and Lyapunov exponents."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

Q_MAX = 200
SNAP_TOL = 1e-7
CLOSE_TOL = 1e-10
TRANSIENT = 1000


@dataclass(frozen=True)
class SawtoothParams:
    a_L: float
    a_R: float
    w: float

    def __post_init__(self):
        if not (self.a_L <= 1 < self.a_R):
            raise ValueError(f"need a_L <= 1 < a_R, got a_L={self.a_L}, a_R={self.a_R}")

    @property
    def z_sw(self) -> float:
        return (self.a_R - 1) / (self.a_R - self.a_L)

    @property
    def invertible(self) -> bool:
        return self.a_L > 0


def sw_lift(p: SawtoothParams, z: float) -> float:
    zs = p.z_sw
    slope = p.a_L if z <= zs else p.a_R
    return p.w + slope * (z - zs) + zs


def sw_step(p: SawtoothParams, z: float) -> float:
    return sw_lift(p, z) % 1.0


def delta_k(p: SawtoothParams, z: float) -> int:
    """Number of whole turns taken by one step: lift minus its mod-one value."""
    lift = sw_lift(p, z)
    return int(round(lift - lift % 1.0))


def slope_at(p: SawtoothParams, z: float) -> float:
    # left one-sided slope at the kink, matching the branch used for the value
    return p.a_L if z <= p.z_sw else p.a_R


def trace(p: SawtoothParams, z0: float, n: int) -> np.ndarray:
    out = np.empty(n + 1)
    z = z0
    out[0] = z
    for i in range(n):
        z = sw_step(p, z)
        out[i + 1] = z
    return out


def circle_dist(a: float, b: float) -> float:
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass
class PeriodicOrbit:
    points: list
    branches: str  # 'L' for z <= z_sw, 'R' otherwise
    turns: list  # delta_k at each point
    multiplier: float

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def rotation(self) -> Fraction:
        return Fraction(sum(self.turns), self.period)


@dataclass
class RotationResult:
    rho: float
    snapped: Fraction | None
    orbit: PeriodicOrbit | None
    flagged_noninvertible: bool

    @property
    def period(self) -> int | None:
        return None if self.orbit is None else self.orbit.period


def find_cycle(p: SawtoothParams, z: float, q_max: int = Q_MAX, tol: float = CLOSE_TOL) -> PeriodicOrbit | None:
    """Least q <= q_max with g^q(z) = z (circle distance below tol)."""
    pts = [z]
    x = z
    for q in range(1, q_max + 1):
        x = sw_step(p, x)
        if circle_dist(x, z) < tol:
            orbit = pts[:q]
            br = "".join("L" if y <= p.z_sw else "R" for y in orbit)
            turns = [delta_k(p, y) for y in orbit]
            mult = float(np.prod([slope_at(p, y) for y in orbit]))
            return PeriodicOrbit(orbit, br, turns, mult)
        pts.append(x)
    return None


def rotation_number(p: SawtoothParams, n_iter: int = 10000, z0: float = 0.0, transient: int = TRANSIENT,
                    q_max: int = Q_MAX, tau: float = SNAP_TOL) -> RotationResult:
    """Average lift displacement, snapped to p/q when the orbit closes with period q."""
    z = z0 % 1.0
    for _ in range(transient):
        z = sw_step(p, z)
    orbit = find_cycle(p, z, q_max)
    if orbit is not None:
        frac = orbit.rotation
        return RotationResult(float(frac), frac, orbit, not p.invertible)
    total = 0.0
    for _ in range(n_iter):
        lift = sw_lift(p, z)
        nz = lift % 1.0
        total += lift - z
        z = nz
    rho = total / n_iter
    snapped = None
    cand = Fraction(rho).limit_denominator(q_max)
    if abs(float(cand) - rho) < tau:
        snapped = cand
    return RotationResult(rho, snapped, None, not p.invertible)


def lyapunov(p: SawtoothParams, n: int = 10000, z0: float = 0.1234, transient: int = TRANSIENT) -> float:
    """Mean of ln|slope| along an orbit; the left slope is used exactly at the kink."""
    if n < 1000:
        raise ValueError("use at least 1000 iterates")
    z = z0
    for _ in range(transient):
        z = sw_step(p, z)
    acc = 0.0
    for _ in range(n):
        s = abs(slope_at(p, z))
        if s == 0:
            return float("-inf")
        acc += np.log(s)
        z = sw_step(p, z)
    return acc / n


def attractors(p: SawtoothParams, n_seeds: int = 16, transient: int = 2000, q_max: int = Q_MAX) -> list:
    """Distinct periodic attractors reached from evenly spaced seeds."""
    found = []
    for z0 in (np.arange(n_seeds) + 0.5) / n_seeds:
        z = z0
        for _ in range(transient):
            z = sw_step(p, z)
        orb = find_cycle(p, z, q_max)
        if orb is None:
            continue
        if not any(min(circle_dist(orb.points[0], y) for y in o.points) < 1e-7 for o in found):
            found.append(orb)
    return found


def solve_orbit(p: SawtoothParams, branches: str, turns) -> PeriodicOrbit | None:
    """Periodic orbit with a prescribed branch/turn pattern, if it exists for p.

    Each step is affine once the branch and the number of turns are fixed, so
    the orbit solves a scalar linear equation. None when the solution does not
    follow the prescribed pattern.
    """
    zs = p.z_sw
    # compose z -> a (z - zs) + zs + w - turn
    A, C = 1.0, 0.0
    for br, t in zip(branches, turns):
        a = p.a_L if br == "L" else p.a_R
        A, C = a * A, a * C - a * zs + zs + p.w - t
    if abs(1 - A) < 1e-14:
        return None
    z = C / (1 - A)
    pts = []
    for br, t in zip(branches, turns):
        if not (0 <= z < 1):
            return None
        if (br == "L") != (z <= zs):
            return None
        pts.append(z)
        a = p.a_L if br == "L" else p.a_R
        z = a * (z - zs) + zs + p.w - t
    if abs(z - pts[0]) > 1e-9:
        return None
    return PeriodicOrbit(pts, branches, list(turns), float(A))


@dataclass
class TongueGrid:
    w: np.ndarray
    theta: np.ndarray
    num: np.ndarray  # snapped numerator, -1 when not snapped
    den: np.ndarray  # snapped denominator (period), 0 when not snapped
    multiplier: np.ndarray
    lyap: np.ndarray
    branches: np.ndarray  # itinerary strings of the detected orbit ('' if none)
    n_attr: np.ndarray
    stability_loss: np.ndarray  # cell has a continued orbit whose multiplier crossed -1
    meta: dict = field(default_factory=dict)

    def rotation(self) -> np.ndarray:
        out = np.full(self.num.shape, np.nan)
        ok = self.den > 0
        out[ok] = self.num[ok] / self.den[ok]
        return out


def _scan_cell(rule, w, th, n_iter, lyap_n, seeds):
    a_L, a_R = rule.slopes(th)
    p = SawtoothParams(a_L, a_R, w)
    res = rotation_number(p, n_iter=n_iter)
    lyap = lyapunov(p, lyap_n)
    n_attr = len(attractors(p, n_seeds=seeds)) if seeds else 0
    if res.orbit is not None:
        o = res.orbit
        return (o.rotation.numerator, o.rotation.denominator, o.multiplier, lyap, o.branches, o.turns, n_attr)
    return (-1, 0, np.nan, lyap, "", [], n_attr)


def _scan_row(args):
    rule, w_grid, th, n_iter, lyap_n, seeds = args
    return [_scan_cell(rule, w, th, n_iter, lyap_n, seeds) for w in w_grid]


def tongue_scan(rule, w_grid, theta_grid, n_iter: int = 4000, lyap_n: int = 2000, seeds: int = 0,
                threads: int = 1) -> TongueGrid:
    """Rotation number, multiplier and Lyapunov exponent over a (w, theta) grid.

    ``rule`` supplies (a_L, a_R) as functions of theta, normally a sector slope rule.
    Stability loss is detected by continuing each detected orbit into the next
    theta row and checking whether its multiplier has passed through -1.
    Rows are independent and may be farmed out to ``threads`` processes.
    """
    w_grid = np.asarray(w_grid, float)
    theta_grid = np.asarray(theta_grid, float)
    ny, nx = len(theta_grid), len(w_grid)
    jobs = [(rule, w_grid, th, n_iter, lyap_n, seeds) for th in theta_grid]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_scan_row, jobs))
    else:
        rows = [_scan_row(j) for j in jobs]
    num = np.full((ny, nx), -1, int)
    den = np.zeros((ny, nx), int)
    mult = np.full((ny, nx), np.nan)
    lyap = np.full((ny, nx), np.nan)
    brs = np.full((ny, nx), "", dtype=object)
    turns = np.empty((ny, nx), dtype=object)
    n_attr = np.zeros((ny, nx), int)
    for i, row in enumerate(rows):
        for j, out in enumerate(row):
            num[i, j], den[i, j], mult[i, j], lyap[i, j], brs[i, j], turns[i, j], n_attr[i, j] = out
    loss = np.zeros((ny, nx), bool)
    for i in range(ny):
        for j in range(nx):
            if den[i, j] == 0 or not (-1 < mult[i, j] < 0):
                continue
            for i2 in (i - 1, i + 1):
                if not 0 <= i2 < ny:
                    continue
                a_L, a_R = rule.slopes(theta_grid[i2])
                orb = solve_orbit(SawtoothParams(a_L, a_R, w_grid[j]), brs[i, j], turns[i, j])
                if orb is not None and orb.multiplier < -1:
                    loss[i, j] = True
    return TongueGrid(w_grid, theta_grid, num, den, mult, lyap, brs, n_attr, loss)


def multiplier_minus_one_theta(rule, w: float, branches: str, turns, th_lo: float, th_hi: float) -> float | None:
    """theta at which the orbit with the given pattern has multiplier -1, by bisection."""

    def m(th):
        a_L, a_R = rule.slopes(th)
        A = 1.0
        for br in branches:
            A *= a_L if br == "L" else a_R
        return A + 1

    lo, hi = m(th_lo), m(th_hi)
    if lo * hi > 0:
        return None
    for _ in range(100):
        mid = 0.5 * (th_lo + th_hi)
        if m(mid) * lo > 0:
            th_lo, lo = mid, m(mid)
        else:
            th_hi = mid
    return 0.5 * (th_lo + th_hi)
