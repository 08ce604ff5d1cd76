"""Centre-manifold frame, recurrent set, return map and its one-dimensional reduction.

Everything here is for the plus family with dl >= 0. Points are written as
x = x_int + h zeta + q, where zeta spans the centre direction of the map
f^{S^(-d)} and q lies in the complement {q : omega^T q = 0}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .plmap import AffinePair, word_apply, word_matrices
from .shrink import unit_eigen
from .symbolic import RotationalParams, SymbolWord, flip_at, g_word, g_word_product, prefix_word, shift

ZERO_EIG = 1e-8


class ManifoldError(RuntimeError):
    pass


class BetaError(ManifoldError):
    pass


@dataclass
class CentreFrame:
    f: AffinePair
    base: RotationalParams
    word: SymbolWord  # S^(-d)
    M: np.ndarray
    PB: np.ndarray
    lam: float
    zeta: np.ndarray
    omega: np.ndarray
    x_int: np.ndarray
    s_step: float

    def u(self, x) -> float:
        return float(self.omega @ (np.asarray(x) - self.x_int))

    def v(self, h: float) -> np.ndarray:
        return self.x_int + h * self.zeta

    def q(self, x) -> np.ndarray:
        y = np.asarray(x) - self.x_int
        return y - self.zeta * (self.omega @ y)

    def fS(self, x) -> np.ndarray:
        return self.M @ x + self.PB

    def iterate(self, x, k: int) -> np.ndarray:
        for _ in range(k):
            x = self.M @ x + self.PB
        return x

    def predicted_iterate(self, x, k: int) -> np.ndarray:
        """The k-th iterate written through the frame: h grows affinely, q is multiplied by M^k."""
        h = self.u(x)
        geo = sum(self.lam ** j for j in range(k))
        q = np.linalg.matrix_power(self.M, k) @ self.q(x)
        return self.x_int + (self.s_step * geo + h * self.lam ** k) * self.zeta + q

    def restricted_inverse(self, y, tol: float = 1e-9) -> np.ndarray:
        return restricted_inverse(self, y, tol)


def centre_frame(f: AffinePair, base: RotationalParams) -> CentreFrame:
    """Frame of f^{S^(-d)} at the map f.

    x_int and s_step come from the bordered system
    (M - I) x - s zeta = -P B, e1^T x = 0, which stays regular when lambda = 1.
    """
    word = shift(base.word, -base.d)
    M, P = word_matrices(f, word)
    lam, omega, zeta = unit_eigen(M)
    N = f.dim
    K = np.zeros((N + 1, N + 1))
    K[:N, :N] = M - np.eye(N)
    K[:N, N] = -zeta
    K[N, 0] = 1.0
    sol = np.linalg.solve(K, np.r_[-(P @ f.B), 0.0])
    return CentreFrame(f, base, word, M, P @ f.B, lam, zeta, omega, sol[:N], float(sol[N]))


def restricted_inverse(frame: CentreFrame, y, tol: float = 1e-9) -> np.ndarray:
    """Preimage of y under f^{S^(-d)} that itself lies in the range of that map.

    With M invertible this is M^{-1}(y - PB). Otherwise the search is
    restricted to x = PB + M z, and M^2 z = y - (I + M) PB is solved on the
    invertible spectral part of M.
    """
    M, PB = frame.M, frame.PB
    y = np.asarray(y, float)
    ev, V = np.linalg.eig(M)
    if np.min(np.abs(ev)) > ZERO_EIG:
        return np.linalg.solve(M, y - PB)
    Vi = np.linalg.inv(V)
    inv_sq = np.array([1 / (e * e) if abs(e) > ZERO_EIG else 0.0 for e in ev])
    rhs = y - PB - M @ PB
    z = np.real(V @ np.diag(inv_sq) @ Vi @ rhs)
    x = PB + M @ z
    if np.linalg.norm(frame.fS(x) - y) > tol * (1 + np.linalg.norm(y)):
        raise ManifoldError("point is not in the range of f^{S^(-d)}")
    return x


def in_range(frame: CentreFrame, y, tol: float = 1e-9) -> bool:
    try:
        restricted_inverse(frame, y, tol)
    except ManifoldError:
        return False
    return True


@dataclass
class FundamentalDomain:
    dl: int
    h_L: float
    h_R: float
    prefix: SymbolWord
    M_prefix: np.ndarray
    denominator: float

    @property
    def width(self) -> float:
        return self.h_R - self.h_L


def h_bounds(frame: CentreFrame, dl: int) -> FundamentalDomain:
    """Endpoints of the fundamental domain on the centre line."""
    if dl < 0:
        raise ValueError("only dl >= 0 is supported")
    wp = prefix_word(dl, frame.base)
    Mp, _ = word_matrices(frame.f, wp)
    den = float(Mp[0] @ frame.zeta)
    if abs(den) < 1e-14:
        raise ManifoldError("vanishing denominator for h_R")
    h_R = -float(word_apply(frame.f, wp, frame.x_int)[0]) / den
    h_L = frame.s_step + frame.lam * h_R
    return FundamentalDomain(dl, h_L, h_R, wp, Mp, den)


def phi_coord(dom: FundamentalDomain, a: float, h: float) -> float:
    if a < 0:
        return (h - dom.h_L) / dom.width
    return (-h / dom.width) % 1.0


def phi_inverse(dom: FundamentalDomain, a: float, z: float) -> float:
    if a < 0:
        return dom.h_L + z * dom.width
    h = -z * dom.width
    # pick the representative inside [h_L, h_R)
    while h < dom.h_L:
        h += dom.width
    while h >= dom.h_R:
        h -= dom.width
    return h


# ---------------------------------------------------------------------------
# recurrent set


def complement_basis(omega: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of {q : omega^T q = 0}."""
    _, _, Vt = np.linalg.svd(omega[None, :])
    return Vt[1:].T


@dataclass
class RecurrentSet:
    frame: CentreFrame
    domain: FundamentalDomain
    k: int
    dl: int
    Q: float
    rho_max: float
    a: float
    G: SymbolWord = field(init=False)
    G0: SymbolWord = field(init=False)
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.G = g_word_product(self.k, self.dl, self.frame.base)
        self.G0 = flip_at(self.G, 0)
        self.basis = complement_basis(self.frame.omega)

    @property
    def radius(self) -> float:
        return self.Q * self.rho_max ** self.k

    def psi(self, q) -> float:
        """h-value of the point of the H face with complement part q."""
        dom = self.domain
        return dom.h_R - float(dom.M_prefix[0] @ q) / dom.denominator

    def face_point(self, q) -> np.ndarray:
        return self.frame.x_int + self.psi(q) * self.frame.zeta + q

    def switch_value(self, x) -> float:
        """e1^T f^{prefix}(x); zero on the H face, positive just past it."""
        return float(word_apply(self.frame.f, self.domain.prefix, x)[0])

    # sampling -----------------------------------------------------------
    def sample_disc(self, rng, n) -> np.ndarray:
        d = self.basis.shape[1]
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        rad = self.radius * rng.random(n) ** (1.0 / d)
        return (g * rad[:, None]) @ self.basis.T

    def sample(self, rng, n: int) -> np.ndarray:
        """Convex combinations alpha x1 + (1 - alpha) x2, x1 on H and x2 on its image."""
        q1 = self.sample_disc(rng, n)
        q2 = self.sample_disc(rng, n)
        alpha = rng.random(n)
        out = np.empty((n, self.frame.f.dim))
        for i in range(n):
            x1 = self.face_point(q1[i])
            x2 = self.frame.fS(self.face_point(q2[i]))
            out[i] = alpha[i] * x1 + (1 - alpha[i]) * x2
        return out

    # membership ---------------------------------------------------------
    def margin(self, x) -> tuple[float, float]:
        """(slack, alpha) of the convex-hull feasibility problem for x.

        x is in the hull iff some alpha in [0, 1] admits complement parts
        p1, p2 with ||p1|| <= alpha R, ||p2|| <= (1 - alpha) R, q = p1 + M p2
        and a matching h. Writing c for the psi-gradient, the h condition reads
        h + c.q - (s + lam h_R) = alpha (h_R - s - lam h_R) + (c M - lam c).p2,
        so for fixed alpha p2 ranges over a line p0(alpha) + t n.

        The slack is the largest sigma with ||p2|| <= (1 - alpha) R - sigma and
        ||q - M p2|| <= alpha R - sigma. It is jointly concave in (alpha, t), so
        a coarse grid followed by nested bounded maximisation finds it.
        Non-negative slack means x lies in the closed hull.
        """
        fr, dom = self.frame, self.domain
        R = self.radius
        B = self.basis
        if B.shape[1] != 2:
            raise NotImplementedError("membership is written for N = 3")
        Mc = B.T @ fr.M @ B
        qc = B.T @ fr.q(x)
        cvec = (dom.M_prefix[0] @ B) / dom.denominator
        hR, lam, s = dom.h_R, fr.lam, fr.s_step
        lhs = fr.u(x) + cvec @ qc - (s + lam * hR)
        coef_a = hR - s - lam * hR
        g = cvec @ Mc - lam * cvec
        gn = float(np.linalg.norm(g))
        if gn < 1e-14:
            raise ManifoldError("h does not depend on p2; degenerate hull description")
        ghat = g / gn
        nvec = np.array([-ghat[1], ghat[0]])
        A = Mc @ nvec

        def sigma(alpha, t):
            alpha, t = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(t, float))
            p0 = ((lhs - alpha * coef_a) / gn)[..., None] * ghat
            p2 = p0 + t[..., None] * nvec
            e = qc - p2 @ Mc.T
            return np.minimum((1 - alpha) * R - np.linalg.norm(p2, axis=-1), alpha * R - np.linalg.norm(e, axis=-1))

        # along the line ||p2|| >= |t|, so slack is below R - |t|
        span = 2 * R

        def inner(alpha):
            r = minimize_scalar(lambda t: -float(sigma(alpha, t)), bounds=(-span, span), method="bounded",
                                options={"xatol": 1e-14 * R})
            return -float(r.fun)

        r = minimize_scalar(lambda a: -inner(a), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-14})
        best, alpha = -float(r.fun), float(r.x)
        for end in (0.0, 1.0):
            v = inner(end)
            if v > best:
                best, alpha = v, end
        return best, alpha

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Half-open membership: the image face belongs to the set, H does not.

        ``tol`` is relative to the ball radius R.
        """
        slack, _ = self.margin(x)
        return slack >= -tol * self.radius and self.switch_value(x) > 0

    def distance_to_H(self, x) -> float:
        """|e1^T f^{prefix}(x)| scaled to an h-distance from the excluded face."""
        return abs(self.switch_value(x) / self.domain.denominator)


def build_recurrent_set(frame: CentreFrame, k: int, dl: int, rho_max: float, a: float, Q: float | None = None,
                        n_probe: int = 64) -> RecurrentSet:
    dom = h_bounds(frame, dl)
    if Q is None:
        Q = default_Q(frame, dom, k, dl, rho_max, n_probe)
    return RecurrentSet(frame, dom, k, dl, Q, rho_max, a)


def default_Q(frame: CentreFrame, dom: FundamentalDomain, k: int, dl: int, rho_max: float, n_probe: int = 64) -> float:
    """Twice the largest complement size of f^{G}(Omega), in units of rho_max^k."""
    G = g_word_product(k, dl, frame.base)
    G0 = flip_at(G, 0)
    worst = 0.0
    for h in np.linspace(dom.h_L, dom.h_R, n_probe, endpoint=False):
        x = frame.v(h)
        y = word_apply(frame.f, G if x[0] <= 0 else G0, x)
        worst = max(worst, float(np.linalg.norm(frame.q(y))))
    return 2 * worst / rho_max ** k


# ---------------------------------------------------------------------------
# beta, T and the return map


@dataclass
class ReturnResult:
    x: np.ndarray
    dk: int
    word: SymbolWord
    monotone: bool


def beta(rset: RecurrentSet, y, k_cap: int = 60) -> tuple[int, np.ndarray, bool]:
    """Smallest dk with e1^T f^{prefix}((f^{S^(-d)})^dk (y)) > 0, and that iterate.

    The search runs over [-k + dl + 1, k_cap]; the tested quantity is expected
    to increase with dk and the third return value reports whether it did.
    """
    fr = rset.frame
    lo = -rset.k + rset.dl + 1
    val = rset.switch_value(y)
    mono = True
    dk = 0
    if val > 0:
        while True:
            if dk - 1 < lo:
                return dk, y, mono
            yp = fr.restricted_inverse(y)
            vp = rset.switch_value(yp)
            if vp > val:
                mono = False
            if vp > 0:
                y, val, dk = yp, vp, dk - 1
            else:
                return dk, y, mono
    while True:
        y2 = fr.fS(y)
        v2 = rset.switch_value(y2)
        if v2 < val:
            mono = False
        y, val, dk = y2, v2, dk + 1
        if val > 0:
            return dk, y, mono
        if dk > k_cap:
            raise BetaError("no sign change within the search window")


def return_map(rset: RecurrentSet, x) -> ReturnResult:
    x = np.asarray(x, float)
    flipped = x[0] > 0
    y = word_apply(rset.frame.f, rset.G0 if flipped else rset.G, x)
    dk, xn, mono = beta(rset, y)
    word = g_word_product(rset.k + dk, rset.dl, rset.frame.base) if rset.k + dk > rset.dl else None
    if word is not None and flipped:
        word = flip_at(word, 0)
    return ReturnResult(xn, dk, word, mono)


def one_d_return(rset: RecurrentSet, h: float) -> float:
    fr = rset.frame
    return fr.u(return_map(rset, fr.v(h)).x)


def invariant_set(rset: RecurrentSet, n_iter: int = 50, n_points: int = 200, seed: int = 0, bins: int = 50) -> dict:
    """Push a sample of the recurrent set forward and summarise where it lands."""
    rng = np.random.default_rng(seed)
    pts = rset.sample(rng, n_points)
    qmax = [max(np.linalg.norm(rset.frame.q(p)) for p in pts)]
    for _ in range(n_iter):
        pts = np.array([return_map(rset, p).x for p in pts])
        qmax.append(max(np.linalg.norm(rset.frame.q(p)) for p in pts))
    hs = np.array([rset.frame.u(p) for p in pts])
    zs = np.array([phi_coord(rset.domain, rset.a, h) for h in hs])
    visited = np.unique(np.floor(zs * bins).astype(int) % bins)
    return {
        "points": pts,
        "h": hs,
        "z": zs,
        "q_norm": np.array([np.linalg.norm(rset.frame.q(p)) for p in pts]),
        "q_max_history": np.array(qmax),
        "coverage": len(visited) / bins,
        "h_in_range": bool(np.all((hs >= rset.domain.h_L - 1e-9) & (hs < rset.domain.h_R + 1e-9))),
    }


# ---------------------------------------------------------------------------
# return map against the sawtooth map


@dataclass
class ErrorReport:
    k: int
    sup_error: float
    mean_error: float
    sup_error_h: float
    agreement: float
    word_length_ok: float
    n_used: int
    n_grid: int
    c0: float
    w: float
    a_L: float
    a_R: float
    kink_offset: float
    rows: list = field(default_factory=list, repr=False)


def theorem_verify(rset: RecurrentSet, params, n_grid: int = 400, c0: float = 0.5) -> ErrorReport:
    """Compare phi(u(F(v(phi^{-1}(z))))) with the sawtooth map g on a z-grid.

    Grid points within c0/k of the kink, of z = 0, or of a z where g wraps
    around the circle are skipped. Errors are circle distances.
    """
    from .sawtooth import sw_lift

    fr, dom, k = rset.frame, rset.domain, rset.k
    zsw = params.z_sw
    wraps = []
    for j in range(-3, 5):
        for slope, lo, hi in ((params.a_L, 0.0, zsw), (params.a_R, zsw, 1.0)):
            if slope != 0:
                zw = zsw + (j - params.w - zsw) / slope
                if lo <= zw <= hi:
                    wraps.append(zw)
    strip = c0 / k
    n = len(fr.base.word)
    n_plus = len(g_word(1, 1, 0, fr.base)) - n
    errs, errs_h, agree, lens, rows = [], [], [], [], []
    for z in np.arange(n_grid) / n_grid:
        near = [abs(z - zsw), z, 1 - z] + [abs(z - zw) for zw in wraps]
        if min(near) <= strip:
            continue
        h = phi_inverse(dom, rset.a, z)
        res = return_map(rset, fr.v(h))
        z2 = phi_coord(dom, rset.a, fr.u(res.x))
        lift = sw_lift(params, z)
        gz = lift % 1.0
        e = abs((z2 - gz + 0.5) % 1.0 - 0.5)
        errs.append(e)
        errs_h.append(e * dom.width)
        agree.append(res.dk == int(round(lift - gz)))
        L = len(res.word) if res.word is not None else -1
        lens.append(abs(L - ((k + res.dk) * n + n_plus)) <= n)
        rows.append((z, z2, gz, res.dk, int(round(lift - gz)), L))
    if not errs:
        raise ManifoldError("exclusion strips cover the whole grid")
    kink = -dom.h_L / dom.width if rset.a < 0 else 0.0
    return ErrorReport(k, float(max(errs)), float(np.mean(errs)), float(max(errs_h)), float(np.mean(agree)),
                       float(np.mean(lens)), len(errs), n_grid, c0, params.w, params.a_L, params.a_R,
                       float(kink - zsw), rows)


# ---------------------------------------------------------------------------
# leading-order formulas used by the lemma checks


def denominator_leading(data, dl: int) -> float:
    from .shrink import kappa

    l, d = data.l, data.d
    if dl == 0:
        return data.ti((l - 1) * d) / data.ti(-d)
    return data.c * data.ti((l - 1) * d) / (data.a * data.ti(-d)) * (kappa(data, 1, dl) - kappa(data, 1, dl - 1))


def h_leading(data, dl: int, eta: float, nu: float) -> tuple[float, float]:
    """Leading-order (h_L, h_R) as linear functions of (eta, nu)."""
    from .shrink import kappa

    l, d = data.l, data.d
    t = data.ti
    if dl == 0:
        hL = eta - t(d) * kappa(data, 1, -1) / t((l + 1) * d) * nu
        hR = eta - t(-d) * kappa(data, 1, 0) / t((l - 1) * d) * nu
        return hL, hR
    kd, km = kappa(data, 1, dl), kappa(data, 1, dl - 1)
    pre = data.a / (data.c * (kd - km))
    hL = pre * (eta - t(-d) * km / t((l - 1) * d) * nu)
    hR = pre * (eta - t(-d) * kd / t((l - 1) * d) * nu)
    return hL, hR


def s_step_leading(data, nu: float) -> float:
    l, d = data.l, data.d
    return data.a * data.ti(-d) / (data.c * data.ti((l - 1) * d)) * nu


def slope_leading(data, dl: int, th: float, flipped: bool) -> float:
    """Leading-order slope of h -> u(f^{G}(v(h))), or of the flipped word."""
    from .shrink import kappa

    l, d = data.l, data.d
    t = data.ti
    if not flipped:
        return t(-d) * kappa(data, 1, dl) * np.tan(th) / t(d)
    if dl == 0:
        return t((l - 1) * d) * kappa(data, 1, -1) * np.tan(th) / t((l + 1) * d)
    return t(-d) * kappa(data, 1, dl - 1) * np.tan(th) / t(d)


def branch_slope(frame: CentreFrame, word: SymbolWord) -> float:
    """Exact slope of h -> u(f^{word}(v(h))) (the word is affine)."""
    M, _ = word_matrices(frame.f, word)
    return float(frame.omega @ M @ frame.zeta)


# ---------------------------------------------------------------------------
# lemma checks along rays and k-ladders


@dataclass
class RayCheck:
    radii: np.ndarray
    errors: dict  # name -> array of |computed - leading order|

    def ratios(self, name: str) -> np.ndarray:
        e = self.errors[name]
        return e[:-1] / e[1:]


def leading_order_ray(data, polar, theta: float, dl: int = 0, radii=(0.08, 0.04, 0.02, 0.01)) -> RayCheck:
    """Errors of the denominator, h_R, h_L and s_step against their leading-order forms.

    Each radius is half the previous one, so an error of order p shows up as a
    ratio of about 2^p between consecutive entries.
    """
    from .shrink import eta_nu

    names = ("denominator", "h_R", "h_L", "s_step")
    errs = {k: [] for k in names}
    for r in radii:
        xi = polar.xi_at(r, theta)
        eta, nu = eta_nu(data.pslice, data.base, xi)
        fr = centre_frame(data.pslice(xi), data.base)
        dom = h_bounds(fr, dl)
        hL, hR = h_leading(data, dl, eta, nu)
        errs["denominator"].append(abs(dom.denominator - denominator_leading(data, dl)))
        errs["h_R"].append(abs(dom.h_R - hR))
        errs["h_L"].append(abs(dom.h_L - hL))
        errs["s_step"].append(abs(fr.s_step - s_step_leading(data, nu)))
    return RayCheck(np.asarray(radii, float), {k: np.asarray(v) for k, v in errs.items()})


def boundary_fixed_point_constants(data, polar, theta: float, ks, dl: int = 0) -> np.ndarray:
    """||f^{G}(x_int) - x_int|| / rho_max^k on the outer sector boundary, one entry per k."""
    from .sectors import boundary_r

    out = []
    for k in ks:
        r, idx = boundary_r(polar, 1, k, dl, theta)
        if idx != 0:
            raise ManifoldError(f"boundary at k={k} is set by border index {idx}, not 0")
        fr = centre_frame(data.pslice(polar.xi_at(r, theta)), data.base)
        G = g_word_product(k, dl, data.base)
        err = np.linalg.norm(word_apply(fr.f, G, fr.x_int) - fr.x_int)
        out.append(err / data.rho_max ** k)
    return np.array(out)


def slope_errors(data, polar, ks, dl: int = 0) -> np.ndarray:
    """|exact - leading-order| slopes of both branches of the reduced map at each sector centre.

    Returns an array of shape (len(ks), 2): columns are the unflipped and the
    flipped branch.
    """
    from .sectors import deltatheta_to_xi, sector_centre, sector_spec

    rows = []
    for k in ks:
        spec = sector_spec(data, 1, k, dl)
        delta, th = sector_centre(polar, spec)
        xi = deltatheta_to_xi(polar, spec, delta, th)
        fr = centre_frame(data.pslice(xi), data.base)
        _, th_x = polar.polar_of_xi(xi)
        G = g_word_product(k, dl, data.base)
        rows.append((abs(branch_slope(fr, G) - slope_leading(data, dl, th_x, False)),
                     abs(branch_slope(fr, flip_at(G, 0)) - slope_leading(data, dl, th_x, True))))
    return np.array(rows)


def sector_recurrent_set(data, polar, k: int, dl: int = 0, delta: float | None = None, theta: float | None = None,
                         Q: float | None = None):
    """Recurrent set and sawtooth parameters at a (delta, theta) point of the plus sector.

    Defaults to the radial centre of the sector at its middle angle.
    """
    from .sectors import deltatheta_to_xi, sector_centre, sector_params, sector_spec

    spec = sector_spec(data, 1, k, dl)
    d0, th0 = sector_centre(polar, spec, theta)
    delta = d0 if delta is None else delta
    xi = deltatheta_to_xi(polar, spec, delta, th0)
    fr = centre_frame(data.pslice(xi), data.base)
    rset = build_recurrent_set(fr, k, dl, data.rho_max, data.a, Q)
    return rset, sector_params(spec, delta, th0), xi
