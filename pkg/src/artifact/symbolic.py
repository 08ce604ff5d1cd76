"""Exact word algebra for rotational symbol sequences over {L, R}.

All index arithmetic is done with Python integers and explicit modular
reduction, so every identity checked here is an exact word equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

LEFT = "L"
RIGHT = "R"


@dataclass(frozen=True)
class SymbolWord:
    """A finite word over {L, R}. Concatenation is ``+``, powers are ``*``."""

    symbols: str
    tag: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise ValueError("a word must contain at least one symbol")
        bad = set(self.symbols) - {LEFT, RIGHT}
        if bad:
            raise ValueError(f"invalid symbols {sorted(bad)}")

    @property
    def length(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, i):
        return self.symbols[i]

    def __str__(self) -> str:
        return self.symbols

    def __add__(self, other: "SymbolWord") -> "SymbolWord":
        return SymbolWord(self.symbols + str(other))

    def __mul__(self, power: int) -> "SymbolWord":
        if power < 0:
            raise ValueError("negative word power")
        if power == 0:
            raise ValueError("the empty word is not representable")
        return SymbolWord(self.symbols * power)

    def count(self, symbol: str) -> int:
        return self.symbols.count(symbol)


def concat(*parts) -> SymbolWord:
    """Concatenate words, skipping empty strings (used for zero powers)."""
    text = "".join(str(p) for p in parts)
    return SymbolWord(text)


@dataclass(frozen=True)
class RotationalParams:
    l: int
    m: int
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 1 <= self.m <= self.n - 1 or gcd(self.m, self.n) != 1:
            raise ValueError(f"m={self.m} must be coprime to n={self.n} and in [1, n-1]")
        if not 1 <= self.l <= self.n - 1:
            raise ValueError(f"l={self.l} must lie in [1, n-1]")

    @property
    def d(self) -> int:
        return mult_inverse(self.m, self.n)

    @property
    def word(self) -> SymbolWord:
        return rotational_word(self.l, self.m, self.n)

    @classmethod
    def parse(cls, text: str) -> "RotationalParams":
        l, m, n = (int(v) for v in text.split(","))
        return cls(l, m, n)


@dataclass(frozen=True)
class FareyRoots:
    left: tuple[int, int]
    right: tuple[int, int]
    l_minus: int | None = None
    l_plus: int | None = None


@dataclass(frozen=True)
class GFamilyIndex:
    sign: int
    k: int
    dl: int
    l_k: int
    m_k: int
    n_k: int
    d_k: int


def mult_inverse(m: int, n: int) -> int:
    """Return d in [1, n-1] with m*d = 1 mod n (n=2 gives 1)."""
    if gcd(m, n) != 1:
        raise ValueError(f"{m} and {n} are not coprime")
    if n == 1:
        return 0
    return pow(m % n, -1, n)


def rotational_word(l: int, m: int, n: int) -> SymbolWord:
    """Itinerary of rigid rotation by m/n with l points left of the switching manifold."""
    if n < 2 or not 1 <= l <= n - 1 or gcd(m, n) != 1:
        raise ValueError(f"invalid rotational parameters ({l},{m},{n})")
    text = "".join(LEFT if (i * m) % n < l else RIGHT for i in range(n))
    return SymbolWord(text, tag=("rotational", l, m, n))


def shift(w: SymbolWord, i: int) -> SymbolWord:
    """Left shift: result_j = w_{(i + j) mod n}."""
    s = str(w)
    i %= len(s)
    return SymbolWord(s[i:] + s[:i])


def flip_at(w: SymbolWord, i: int) -> SymbolWord:
    s = str(w)
    if not 0 <= i < len(s):
        raise IndexError(f"flip index {i} outside word of length {len(s)}")
    other = RIGHT if s[i] == LEFT else LEFT
    return SymbolWord(s[:i] + other + s[i + 1:])


def cyclic_equal(u: SymbolWord, v: SymbolWord) -> bool:
    return len(u) == len(v) and str(v) in str(u) * 2


def cyclic_offset(u: SymbolWord, v: SymbolWord) -> int | None:
    """Smallest i with shift(u, i) == v, or None."""
    if len(u) != len(v):
        return None
    pos = (str(u) * 2).find(str(v))
    return None if pos < 0 else pos


def partitions(base: RotationalParams) -> tuple[SymbolWord | None, SymbolWord | None, SymbolWord | None]:
    """Split S into X, Y with X + Y = S, plus the prefix X-hat of length (-d) mod n.

    X ends just before index l*d mod n, where the second switching point of the
    flipped cycle sits.
    """
    l, n, d = base.l, base.n, base.d
    s = str(base.word)
    cut = (l * d) % n
    hat = (-d) % n
    x = SymbolWord(s[:cut]) if cut else None
    y = SymbolWord(s[cut:])
    xh = SymbolWord(s[:hat]) if hat else None
    return x, y, xh


def farey_roots(m: int, n: int, l: int | None = None) -> FareyRoots:
    """Farey neighbours m-/n- < m/n < m+/n+ with denominators below n."""
    if not 0 < m < n or gcd(m, n) != 1:
        raise ValueError(f"{m}/{n} is not a reduced fraction in (0,1)")
    d = mult_inverse(m, n)
    # m*n_minus - m_minus*n = 1 gives n_minus = d (mod n); d in [1, n-1]
    n_minus = d
    m_minus = (m * n_minus - 1) // n
    n_plus = n - n_minus
    m_plus = m - m_minus
    if n == 2 and m == 1:
        m_minus, n_minus, m_plus, n_plus = 0, 1, 1, 1
    lm = lp = None
    if l is not None:
        lm = (l * n_minus) // n
        lp = -((-l * n_plus) // n)
    return FareyRoots((m_minus, n_minus), (m_plus, n_plus), lm, lp)


def g_index(sign: int, k: int, dl: int, base: RotationalParams) -> GFamilyIndex:
    roots = farey_roots(base.m, base.n, base.l)
    if sign > 0:
        (mr, nr), lr = roots.right, roots.l_plus
    else:
        (mr, nr), lr = roots.left, roots.l_minus
    l_k = k * base.l + lr
    m_k = k * base.m + mr
    n_k = k * base.n + nr
    return GFamilyIndex(1 if sign > 0 else -1, k, dl, l_k, m_k, n_k, mult_inverse(m_k, n_k))


def g_word(sign: int, k: int, dl: int, base: RotationalParams) -> SymbolWord:
    """The rotational word F[l_k + dl, m_k, n_k] of the G+ or G- family."""
    if k < 1:
        raise ValueError("k must be positive")
    idx = g_index(sign, k, dl, base)
    lk = idx.l_k + dl
    if not 1 <= lk <= idx.n_k - 1:
        raise ValueError(f"l index {lk} outside [1, {idx.n_k - 1}]")
    w = rotational_word(lk, idx.m_k, idx.n_k)
    return SymbolWord(str(w), tag=("G", idx))


def g_word_product(k: int, dl: int, base: RotationalParams) -> SymbolWord:
    """Product form (X Y^0bar)^dl X-hat (S^(-d))^(k-dl) of the G+ word."""
    if dl < 0:
        raise ValueError("product form only covers dl >= 0")
    if not 0 <= dl <= k - 1:
        raise ValueError("need 0 <= dl <= k-1")
    x, y, xh = partitions(base)
    s_md = shift(base.word, -base.d)
    block = str(x or "") + str(flip_at(y, 0))
    return SymbolWord(block * dl + str(xh or "") + str(s_md) * (k - dl))


def prefix_word(dl: int, base: RotationalParams) -> SymbolWord:
    """X^0bar (Y^0bar X)^dl, the word that carries the centre manifold onto the switching manifold."""
    x, y, _ = partitions(base)
    if x is None:
        raise ValueError("X is empty for this base")
    return SymbolWord(str(flip_at(x, 0)) + (str(flip_at(y, 0)) + str(x)) * dl)


def rotation_of_itinerary(itinerary: str) -> tuple[int, int, int] | None:
    """Identify a periodic itinerary as a cyclic shift of some F[l, m, p].

    Returns (l, m, p) or None when the itinerary is not rotational.
    """
    p = len(itinerary)
    l = itinerary.count(LEFT)
    if p == 1:
        return None
    if l == 0 or l == p:
        return None
    w = SymbolWord(itinerary)
    for m in range(1, p):
        if gcd(m, p) != 1:
            continue
        if cyclic_equal(rotational_word(l, m, p), w):
            return l, m, p
    return None


def main_identity_holds(base: RotationalParams) -> bool:
    """Flipping S at 0 and l*d mod n gives the shift of S by -d."""
    s = base.word
    d = base.d
    return flip_at(flip_at(s, 0), (base.l * d) % base.n) == shift(s, -d)


def all_bases(n_max: int):
    """Every (l, m, n) with 2 <= n <= n_max, m/n reduced in (0, 1) and 1 <= l <= n - 1."""
    for n in range(2, n_max + 1):
        for m in range(1, n):
            if gcd(m, n) == 1:
                for l in range(1, n):
                    yield RotationalParams(l, m, n)


def family_identity_failures(base: RotationalParams, k_max: int) -> list[tuple[str, int, int]]:
    """Check the G+ word identities for 1 <= k <= k_max, 0 <= dl <= k - 1.

    Returns (name, k, dl) for every identity that fails: the product form of
    G+[k, dl], the flip-at-0 relation with G+[k, dl - 1], the commutation with
    S^(-d), and d_k = n. An empty list means all hold exactly.
    """
    bad = []
    s_md = shift(base.word, -base.d)
    for k in range(1, k_max + 1):
        for dl in range(k):
            idx = g_index(1, k, dl, base)
            try:
                g = g_word(1, k, dl, base)
            except ValueError:
                continue
            if idx.d_k != base.n:
                bad.append(("d_k", k, dl))
            if g != g_word_product(k, dl, base):
                bad.append(("product", k, dl))
            if idx.l_k + dl - 1 >= 1:
                lower = g_word(1, k, dl - 1, base)
                if flip_at(g, 0) != shift(lower, -idx.d_k):
                    bad.append(("flip", k, dl))
            flipped = flip_at(flip_at(g, 0), ((idx.l_k + dl) * idx.d_k) % idx.n_k)
            if s_md + g != flipped + s_md:
                bad.append(("commute", k, dl))
    return bad
