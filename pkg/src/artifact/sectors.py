"""Polar and (delta, theta) coordinates about a shrinking point, sector corners and sawtooth slopes."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .plmap import SingularCycleError, cycle, periodic_point, word_matrices
from .shrink import NoConvergence, ShrinkPointData, eta_nu, kappa, newton2, shrink_data, tan_theta, theta
from .symbolic import g_index, g_word, shift

POLE_MARGIN = 0.05  # keep theta grids this far from multiples of pi/2


class SectorError(RuntimeError):
    pass


def gamma(th: float) -> float:
    """Leading-order shape of the tongue boundaries: k r_k(theta) -> gamma(theta)."""
    t = float(th) % (np.pi / 2)
    if t < 1e-15 or np.pi / 2 - t < 1e-15:
        raise ValueError("gamma has a pole at integer multiples of pi/2")
    c, s = np.cos(t), np.sin(t)
    if abs(c - s) < 1e-7:
        # series about pi/4: value sqrt(2), first-order term vanishes by symmetry
        e = t - np.pi / 4
        return float(np.sqrt(2) * (1 + e * e / 6))
    return float((np.log(c) - np.log(s)) / (c - s))


@dataclass
class PolarFrame:
    """Scaled polar coordinates (r, theta) about the shrinking point xi*.

    Also caches parameter points along rays so that inverting the polar map
    can continue from the nearest point already solved.
    """

    data: ShrinkPointData
    scale_eta: float = 0.0
    scale_nu: float = 0.0
    _rays: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        D = self.data
        l, d = D.l, D.d
        self.scale_eta = abs(D.c * D.ti(d) / D.a)
        self.scale_nu = abs(D.c * D.ti((l - 1) * d) / D.a)
        if not (np.isfinite(self.scale_eta) and np.isfinite(self.scale_nu) and self.scale_eta > 0 and self.scale_nu > 0):
            raise SectorError("polar scales must be positive and finite")

    @property
    def origin(self) -> np.ndarray:
        return self.data.xi

    def to_polar(self, eta: float, nu: float) -> tuple[float, float]:
        x, y = eta / self.scale_eta, nu / self.scale_nu
        th = float(np.arctan2(y, x) % (2 * np.pi))
        # a tiny negative angle rounds up to exactly 2 pi
        return float(np.hypot(x, y)), 0.0 if th >= 2 * np.pi else th

    def from_polar(self, r: float, th: float) -> tuple[float, float]:
        return self.scale_eta * r * np.cos(th), self.scale_nu * r * np.sin(th)

    def polar_of_xi(self, xi) -> tuple[float, float]:
        en = eta_nu(self.data.pslice, self.data.base, xi)
        return self.to_polar(*en)

    def xi_at(self, r: float, th: float, max_step: float = 0.04) -> np.ndarray:
        """Parameter point with polar coordinates (r, theta), by continuation along the ray."""
        key = round(float(th), 12)
        ray = self._rays.setdefault(key, ([0.0], [self.data.xi.copy()]))
        rs, xis = ray
        i = bisect.bisect_left(rs, r)
        if i < len(rs) and abs(rs[i] - r) < 1e-15:
            return xis[i].copy()
        j = i - 1 if i > 0 else 0
        r0, xi = rs[j], xis[j].copy()
        if r0 > r:
            r0, xi = 0.0, self.data.xi.copy()
        n_steps = max(1, int(np.ceil(abs(r - r0) / max_step)))
        pslice, base = self.data.pslice, self.data.base
        for rr in np.linspace(r0, r, n_steps + 1)[1:]:
            target = np.array(self.from_polar(rr, th))
            try:
                xi = newton2(lambda z: eta_nu(pslice, base, z) - target, xi, tol=1e-13)
            except (NoConvergence, SingularCycleError, np.linalg.LinAlgError) as exc:
                raise SectorError(f"polar inversion failed at r={rr:.6g}, theta={th:.6g}") from exc
            k = bisect.bisect_left(rs, rr)
            if not (k < len(rs) and rs[k] == rr):
                rs.insert(k, rr)
                xis.insert(k, xi.copy())
        return xi.copy()


def border_indices(sign: int, k: int, dl: int, base) -> tuple[int, int]:
    idx = g_index(sign, k, dl, base)
    return 0, ((idx.l_k + dl - 1) * idx.d_k) % idx.n_k


def border_s(frame: PolarFrame, word, index: int, r: float, th: float) -> float:
    xi = frame.xi_at(r, th)
    f = frame.data.pslice(xi)
    return float(periodic_point(f, shift(word, index))[0])


def _roots_on_ray(fun, r_lo, r_hi, n_scan=48):
    rs = np.linspace(r_lo, r_hi, n_scan)
    vals = []
    for r in rs:
        try:
            vals.append(fun(r))
        except (SingularCycleError, SectorError, np.linalg.LinAlgError):
            vals.append(np.nan)
    vals = np.array(vals)
    roots = []
    for i in range(n_scan - 1):
        v0, v1 = vals[i], vals[i + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)) or v0 * v1 > 0:
            continue
        try:
            root = brentq(fun, rs[i], rs[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        except (ValueError, SingularCycleError, SectorError):
            continue
        # a sign change across a pole of the cycle is not a boundary
        if abs(fun(root)) < 1e-9 * (1 + abs(v0) + abs(v1)):
            roots.append(root)
    return roots


def boundary_r(frame: PolarFrame, sign: int, k: int, dl: int, th: float) -> tuple[float, int]:
    """Radius of the inner boundary of the G[k]-tongue along the ray theta.

    Both candidate border indices are solved and the one at smaller r is
    returned together with its index.
    """
    base = frame.data.base
    word = g_word(sign, k, dl, base)
    g = gamma(th)
    best = None
    for idx in border_indices(sign, k, dl, base):
        roots = _roots_on_ray(lambda r: border_s(frame, word, idx, r, th), 0.15 * g / k, 1.6 * g / k)
        if roots:
            # the curve closest to its asymptotic position gamma/k
            r = min(roots, key=lambda x: abs(x - g / k))
            if best is None or r < best[0]:
                best = (r, idx)
    if best is None:
        raise SectorError(f"no boundary found for k={k}, theta={th}")
    return best


def delta_coord(frame: PolarFrame, sign: int, k: int, dl: int, r: float, th: float) -> float:
    rk, _ = boundary_r(frame, sign, k, dl, th)
    return (1 - r / rk) / k


# ---------------------------------------------------------------------------
# sector description and sawtooth slopes


def neighbour_dl(sign: int, dl: int) -> int:
    """Second index bounding the sector: dl - 1 for plus sectors, dl + 1 for minus sectors."""
    return dl - 1 if sign > 0 else dl + 1


@dataclass
class Corner:
    kind: str  # "shrinking-point" or "stability-loss"
    dl: int
    xi: np.ndarray | None
    theta: float | None
    r: float | None


@dataclass
class SectorSpec:
    sign: int
    k: int
    dl: int
    theta_min: float
    theta_max: float
    index_min: int
    index_max: int
    kappa_min: float
    kappa_max: float
    corners: list = field(default_factory=list)

    @property
    def mixed(self) -> bool:
        return self.kappa_min * self.kappa_max < 0

    @property
    def theta_mid(self) -> float:
        return 0.5 * (self.theta_min + self.theta_max)


def sector_spec(data: ShrinkPointData, sign: int, k: int, dl: int) -> SectorSpec:
    """Angular extent and kappa signs of the sector, without corner solves."""
    other = neighbour_dl(sign, dl)
    k_a, k_b = kappa(data, sign, dl), kappa(data, sign, other)
    if k_a == 0 or k_b == 0:
        raise SectorError("kappa vanishes; sector undefined")
    if k_a < 0 and k_b < 0:
        raise SectorError("both kappa values are negative; such sectors are excluded")
    th_a, th_b = theta(data, sign, dl), theta(data, sign, other)
    if th_a <= th_b:
        return SectorSpec(sign, k, dl, th_a, th_b, dl, other, k_a, k_b)
    return SectorSpec(sign, k, dl, th_b, th_a, other, dl, k_b, k_a)


def slope_ratio(spec: SectorSpec) -> float:
    """a_R / a_L from the sector angles: sgn tan(theta_min) / tan(theta_max)."""
    sgn = -1.0 if spec.mixed else 1.0
    return sgn * np.tan(spec.theta_min) / np.tan(spec.theta_max)


def slope_ratio_kappa(data: ShrinkPointData, spec: SectorSpec) -> float:
    """Same ratio written with signed kappa values and -a/b in place of the t-products."""

    def weight(dl: int) -> float:
        if spec.sign > 0:
            return (1.0 if dl >= 0 else -data.b / data.a) / kappa(data, 1, dl)
        return (1.0 if dl <= 0 else -data.b / data.a) * kappa(data, -1, dl)

    return weight(spec.index_min) / weight(spec.index_max)


def slope_ratio_tan(data: ShrinkPointData, spec: SectorSpec) -> float:
    """Ratio using t-values directly with signed kappa (a third, independent route)."""
    return tan_theta(data, spec.sign, spec.index_min, signed=True) / tan_theta(data, spec.sign, spec.index_max, signed=True)


@dataclass(frozen=True)
class SawtoothRule:
    """Sector slope rule: slopes as functions of theta, displacement w = k^2 delta."""

    sign: int
    theta_min: float
    theta_max: float
    mixed: bool

    @classmethod
    def from_spec(cls, spec: SectorSpec) -> "SawtoothRule":
        return cls(spec.sign, spec.theta_min, spec.theta_max, spec.mixed)

    def slopes(self, th: float) -> tuple[float, float]:
        sgn = -1.0 if self.mixed else 1.0
        t = np.tan(th)
        if self.sign > 0:
            return sgn * t / np.tan(self.theta_min), t / np.tan(self.theta_max)
        return sgn * np.tan(self.theta_max) / t, np.tan(self.theta_min) / t

    @property
    def ratio(self) -> float:
        sgn = -1.0 if self.mixed else 1.0
        return sgn * np.tan(self.theta_min) / np.tan(self.theta_max)


def sector_params(spec: SectorSpec, delta: float, th: float):
    from .sawtooth import SawtoothParams

    a_L, a_R = SawtoothRule.from_spec(spec).slopes(th)
    return SawtoothParams(a_L, a_R, spec.k ** 2 * delta)


# ---------------------------------------------------------------------------
# corners


def _g_shrink_residual(data: ShrinkPointData, sign: int, k: int, dl: int):
    from .symbolic import RotationalParams

    idx = g_index(sign, k, dl, data.base)
    gbase = RotationalParams(idx.l_k + dl, idx.m_k, idx.n_k)
    return gbase, (lambda xi: eta_nu(data.pslice, gbase, xi))


def stability_loss_residual(data: ShrinkPointData, sign: int, k: int, dl: int, border: int):
    word = g_word(sign, k, dl, data.base)

    def fun(xi):
        f = data.pslice(xi)
        s = periodic_point(f, shift(word, border))[0]
        M, _ = word_matrices(f, word)
        ev = np.linalg.eigvals(M)
        real = ev[np.abs(ev.imag) < 1e-9].real
        if len(real) == 0:
            raise SingularCycleError("no real multiplier")
        m = real[np.argmin(np.abs(real + 1))]
        return np.array([s, m + 1])

    return fun


def locate_corner(frame: PolarFrame, sign: int, k: int, dl: int, guess_theta: float) -> Corner:
    """Corner of the G[k]-tongue boundary near theta^{sign}_{dl}.

    A G[k, dl]-shrinking point when kappa > 0, otherwise the point on the tongue
    boundary where a multiplier of the G[k, dl]-cycle equals -1.
    """
    data = frame.data
    kap = kappa(data, sign, dl)
    # start on the inner boundary slightly inside the angular window
    r0, border = boundary_r(frame, sign, k, dl, guess_theta)
    xi0 = frame.xi_at(r0, guess_theta)
    if kap > 0:
        _, fun = _g_shrink_residual(data, sign, k, dl)
        kind = "shrinking-point"
    else:
        fun = stability_loss_residual(data, sign, k, dl, border)
        kind = "stability-loss"
    try:
        xi = newton2(fun, xi0, tol=1e-11, max_iter=60)
    except (NoConvergence, SingularCycleError, np.linalg.LinAlgError) as exc:
        raise SectorError(f"corner solve failed for k={k}, dl={dl}") from exc
    r, th = frame.polar_of_xi(xi)
    return Corner(kind, dl, xi, th, r)


def sector_corners(frame: PolarFrame, sign: int, k: int, dl: int, inset: float = 0.03) -> SectorSpec:
    """Sector with its four corners p_k, q_k, p_{k+1}, q_{k+1} located."""
    spec = sector_spec(frame.data, sign, k, dl)
    corners = []
    for kk in (k, k + 1):
        for which, th0 in ((spec.index_min, spec.theta_min + inset), (spec.index_max, spec.theta_max - inset)):
            corners.append(locate_corner(frame, sign, kk, which, th0))
    spec.corners = corners
    return spec


# ---------------------------------------------------------------------------
# (delta, theta) <-> xi


def deltatheta_to_xi(frame: PolarFrame, spec: SectorSpec, delta: float, th: float) -> np.ndarray:
    """Parameter point with sector coordinates (delta, theta).

    r follows from delta = (1 - r / r_k(theta)) / k, so only the boundary
    radius and the polar inversion are needed.
    """
    rk, _ = boundary_r(frame, spec.sign, spec.k, spec.dl, th)
    r = rk * (1 - spec.k * delta)
    return frame.xi_at(r, th)


def xi_to_deltatheta(frame: PolarFrame, spec: SectorSpec, xi) -> tuple[float, float]:
    r, th = frame.polar_of_xi(xi)
    return delta_coord(frame, spec.sign, spec.k, spec.dl, r, th), th


def sector_centre(frame: PolarFrame, spec: SectorSpec, th: float | None = None) -> tuple[float, float]:
    """(delta, theta) half way between the outer and inner boundaries in r.

    To leading order this is delta = 1 / (2 k^2); at small k the two differ and
    the literal value can fall outside the sector.
    """
    th = spec.theta_mid if th is None else th
    rk, _ = boundary_r(frame, spec.sign, spec.k, spec.dl, th)
    rk1, _ = boundary_r(frame, spec.sign, spec.k + 1, spec.dl, th)
    r = 0.5 * (rk + rk1)
    return (1 - r / rk) / spec.k, th


def inner_delta(frame: PolarFrame, spec: SectorSpec, th: float) -> float:
    """delta on the inner boundary (the k+1 tongue boundary)."""
    rk, _ = boundary_r(frame, spec.sign, spec.k, spec.dl, th)
    rk1, _ = boundary_r(frame, spec.sign, spec.k + 1, spec.dl, th)
    return (1 - rk1 / rk) / spec.k
