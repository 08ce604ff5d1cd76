"""Locating shrinking points and the scalar invariants attached to them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plmap import AffinePair, ParamSlice, SingularCycleError, TAU_SING, admissible, cycle, word_matrices
from .symbolic import RotationalParams, SymbolWord, flip_at, shift


class ShrinkError(RuntimeError):
    pass


class NoConvergence(ShrinkError):
    pass


class GenericityError(ShrinkError):
    pass


class AdmissibilityError(ShrinkError):
    pass


def unit_eigen(M: np.ndarray, sep: float = 1e-6):
    """Eigenvalue of M nearest 1 with right (e1 v = 1) and left (u v = 1) eigenvectors."""
    w, V = np.linalg.eig(M)
    order = np.argsort(np.abs(w - 1))
    if len(w) > 1 and abs(w[order[1]] - w[order[0]]) < sep and abs(w[order[1]] - 1) < 0.1:
        raise ShrinkError("eigenvalue near one is not simple")
    i = order[0]
    lam = w[i]
    v = np.real(V[:, i])
    if abs(v[0]) < 1e-14:
        raise ShrinkError("unit eigenvector has vanishing first component")
    v = v / v[0]
    wl, U = np.linalg.eig(M.T)
    j = np.argmin(np.abs(wl - lam))
    u = np.real(U[:, j])
    u = u / (u @ v)
    return float(np.real(lam)), u, v


def flipped_words(base: RotationalParams) -> tuple[SymbolWord, SymbolWord]:
    """S with its 0-th symbol toggled, and S with its (l d mod n)-th symbol toggled."""
    s = base.word
    return flip_at(s, 0), flip_at(s, (base.l * base.d) % base.n)


def eta_nu(pslice: ParamSlice, base: RotationalParams, xi) -> np.ndarray:
    """(s_0, s_{l d}) of the S^0bar-cycle; both vanish at a shrinking point."""
    f = pslice(xi)
    s0, _ = flipped_words(base)
    c = cycle(f, s0)
    return np.array([c.s[0], c.s[(base.l * base.d) % base.n]])


def fd_jacobian(fun, xi, rel_step: float = 1e-6) -> np.ndarray:
    xi = np.asarray(xi, float)
    cols = []
    for j in range(len(xi)):
        h = rel_step * (1 + abs(xi[j]))
        e = np.zeros_like(xi)
        e[j] = h
        cols.append((fun(xi + e) - fun(xi - e)) / (2 * h))
    return np.column_stack(cols)


def newton2(fun, guess, tol: float = 1e-12, max_iter: int = 50, rel_step: float = 1e-6) -> np.ndarray:
    """Damped 2D Newton with a central-difference Jacobian.

    Steps that make the residual larger, or land on a singular cycle, are halved
    up to 20 times before giving up.
    """
    xi = np.asarray(guess, float).copy()
    F = fun(xi)
    for _ in range(max_iter):
        if np.linalg.norm(F) < tol:
            return xi
        J = fd_jacobian(fun, xi, rel_step)
        dx = np.linalg.solve(J, -F)
        lam = 1.0
        for _ in range(20):
            try:
                trial = xi + lam * dx
                Ft = fun(trial)
                if np.all(np.isfinite(Ft)) and np.linalg.norm(Ft) < max(np.linalg.norm(F), tol) * (1 - 1e-4 * lam) + 1e-300:
                    break
            except (SingularCycleError, np.linalg.LinAlgError):
                pass
            lam *= 0.5
        else:
            raise NoConvergence(f"line search failed at {xi}, residual {np.linalg.norm(F):.3e}")
        xi, F = trial, Ft
    if np.linalg.norm(F) < tol * 10:
        return xi
    raise NoConvergence(f"no convergence after {max_iter} iterations, residual {np.linalg.norm(F):.3e}")


@dataclass
class ShrinkPointData:
    base: RotationalParams
    pslice: ParamSlice
    xi: np.ndarray
    f: AffinePair
    y: np.ndarray  # S^0bar-cycle points
    t: np.ndarray  # their first components
    a: float
    b: float
    c: float
    rho_max: float
    lam_S: float
    J: np.ndarray
    residual: float
    uv: dict = field(default_factory=dict)

    @property
    def l(self):
        return self.base.l

    @property
    def n(self):
        return self.base.n

    @property
    def d(self):
        return self.base.d

    def ti(self, j: int) -> float:
        return float(self.t[j % self.n])

    def four_t_residual(self) -> float:
        l, d = self.l, self.d
        rhs = -(self.ti(d) * self.ti((l - 1) * d)) / (self.ti(-d) * self.ti((l + 1) * d))
        lhs = self.a / self.b
        return abs(lhs - rhs) / abs(lhs)

    def eigvecs(self, j: int):
        """(u_j, v_j) for the unit eigenvalue of M_{S^(j)}."""
        j %= self.n
        if j not in self.uv:
            M, _ = word_matrices(self.f, shift(self.base.word, j))
            _, u, v = unit_eigen(M)
            self.uv[j] = (u, v)
        return self.uv[j]


def shrink_data(pslice: ParamSlice, base: RotationalParams, xi) -> ShrinkPointData:
    """Evaluate every shrinking-point scalar at xi (no solve)."""
    xi = np.asarray(xi, float)
    f = pslice(xi)
    s0, sld = flipped_words(base)
    cyc = cycle(f, s0)
    eye = np.eye(f.dim)
    a = float(np.linalg.det(eye - word_matrices(f, s0)[0]))
    b = float(np.linalg.det(eye - word_matrices(f, sld)[0]))
    M_S, _ = word_matrices(f, base.word)
    ev = np.linalg.eigvals(M_S)
    i = int(np.argmin(np.abs(ev - 1)))
    rest = np.delete(ev, i)
    c = float(np.real(np.prod(1 - rest)))
    rho = float(np.max(np.abs(rest))) if len(rest) else 0.0
    J = fd_jacobian(lambda z: eta_nu(pslice, base, z), xi)
    res = float(np.linalg.norm([cyc.s[0], cyc.s[(base.l * base.d) % base.n]]))
    return ShrinkPointData(base, pslice, xi, f, cyc.points, cyc.s.copy(), a, b, c, rho, float(np.real(ev[i])), J, res)


def locate(pslice: ParamSlice, base: RotationalParams, guess, tol: float = 1e-12, max_iter: int = 50,
           check: bool = True) -> ShrinkPointData:
    """Newton solve for eta = nu = 0, then verify genericity and admissibility."""
    if not 2 <= base.l <= base.n - 2:
        raise ValueError("shrinking points need 2 <= l <= n-2")
    xi = newton2(lambda z: eta_nu(pslice, base, z), guess, tol=tol, max_iter=max_iter)
    data = shrink_data(pslice, base, xi)
    if check:
        rep = genericity_report(data)
        if not rep["generic"]:
            raise GenericityError(f"genericity violated: {rep}")
        s0, _ = flipped_words(base)
        cyc = cycle(data.f, s0)
        if not admissible(cyc, 1e-8):
            raise AdmissibilityError("the S^0bar-cycle is not admissible at the located point")
    return data


def adjugate(K: np.ndarray) -> np.ndarray:
    n = K.shape[0]
    adj = np.empty_like(K)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(K, i, axis=0), j, axis=1)
            adj[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def genericity_report(data: ShrinkPointData, tau: float = TAU_SING) -> dict:
    f = data.f
    eye = np.eye(f.dim)
    g1 = float((adjugate(eye - f.A_L) @ f.B)[0])
    margin = np.delete(np.abs(data.t), [0, (data.l * data.d) % data.n])
    return {
        "e1_adj_B": g1,
        "a": data.a,
        "b": data.b,
        "generic": bool(abs(g1) > tau and abs(data.a) > tau and abs(data.b) > tau),
        "rho_max": data.rho_max,
        "rho_max_below_one": bool(data.rho_max < 1),
        "c": data.c,
        "c_positive": bool(data.c > 0),
        "t_margin": float(margin.min()) if len(margin) else float("nan"),
    }


# ---------------------------------------------------------------------------
# kappa and theta


def kappa(data: ShrinkPointData, sign: int, dl: int) -> float:
    """The scalar that decides whether G[k, dl]-shrinking points exist for large k."""
    l, d, n = data.l, data.d, data.n
    ld = (l * d) % n
    s0, sld = flipped_words(data.base)
    f = data.f
    if sign > 0:
        if dl >= 0:
            u, _ = data.eigvecs(0)
            _, v = data.eigvecs(-d)
            M, _ = word_matrices(f, sld)
            return float(u @ np.linalg.matrix_power(M, dl) @ v)
        u, _ = data.eigvecs(ld)
        _, v = data.eigvecs((l - 1) * d)
        M, _ = word_matrices(f, shift(s0, ld))
        return float(u @ np.linalg.matrix_power(M, -dl - 1) @ v)
    if dl <= 0:
        u, _ = data.eigvecs(-d)
        _, v = data.eigvecs(0)
        M, _ = word_matrices(f, s0)
        return float(u @ np.linalg.matrix_power(M, -dl) @ v)
    u, _ = data.eigvecs((l - 1) * d)
    _, v = data.eigvecs(ld)
    M, _ = word_matrices(f, shift(sld, ld))
    return float(u @ np.linalg.matrix_power(M, dl - 1) @ v)


def theta_interval(sign: int, a: float) -> tuple[float, float]:
    """Quadrant in which theta^{sign} must lie, which depends on sign(a)."""
    lower_half = (sign > 0) == (a < 0)
    return (1.5 * np.pi, 2 * np.pi) if lower_half else (0.5 * np.pi, np.pi)


def tan_theta(data: ShrinkPointData, sign: int, dl: int, signed: bool = False) -> float:
    """tan of the leading-order corner angle; ``signed`` keeps the sign of kappa."""
    l, d = data.l, data.d
    k = kappa(data, sign, dl)
    kk = k if signed else abs(k)
    if k == 0:
        raise ZeroDivisionError("kappa vanishes; theta undefined")
    t = data.ti
    if sign > 0:
        if dl >= 0:
            return t(d) / (t(-d) * kk)
        return t((l + 1) * d) / (t((l - 1) * d) * kk)
    if dl <= 0:
        return t(d) * kk / t(-d)
    return t((l + 1) * d) * kk / t((l - 1) * d)


def theta(data: ShrinkPointData, sign: int, dl: int) -> float:
    x = tan_theta(data, sign, dl)
    ang = np.arctan(x) % np.pi
    lo, _ = theta_interval(sign, data.a)
    if lo > np.pi:
        ang += np.pi
    return float(ang)


def theta_in_quadrant(data: ShrinkPointData, sign: int, dl: int) -> bool:
    lo, hi = theta_interval(sign, data.a)
    return lo < theta(data, sign, dl) < hi


@dataclass
class KappaTable:
    dls: list
    kappa_plus: list
    kappa_minus: list
    theta_plus: list
    theta_minus: list


def kappa_table(data: ShrinkPointData, lo: int = -4, hi: int = 4) -> KappaTable:
    dls = list(range(lo, hi + 1))
    kp = [kappa(data, 1, dl) for dl in dls]
    km = [kappa(data, -1, dl) for dl in dls]
    tp = [theta(data, 1, dl) if k != 0 else float("nan") for dl, k in zip(dls, kp)]
    tm = [theta(data, -1, dl) if k != 0 else float("nan") for dl, k in zip(dls, km)]
    return KappaTable(dls, kp, km, tp, tm)
