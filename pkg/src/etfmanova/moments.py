"""Sub-frame moment theory for equiangular tight frames.

Exact finite-``n`` moments (orders 1 to 4) and variances (orders 1 and 2),
the recursive non-crossing-partition engine for the asymptotic moments, the
erasure Welch bound and the spectral variance/kurtosis bounds.

All arithmetic is exact. The recursion involves ``sqrt(x)`` with
``x = 1/gamma - 1``, so its intermediate values live in ``Q(sqrt(x))`` and are
carried as :class:`Surd` pairs; the final moments are rational, which
:func:`asymptotic_moment` asserts rather than assumes.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

from .limits import manova_moment

PARTITION_CAP = 10
PARTITION_HARD_CAP = 12


class MomentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentContext:
    """Rational parameters of a moment computation.

    ``n`` is only needed for finite-size quantities; when given, ``gamma * n``
    must be an integer (the frame dimension ``m``).
    """

    gamma: Fraction
    p: Fraction
    n: int | None = None

    def __post_init__(self):
        g, p = Fraction(self.gamma), Fraction(self.p)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "p", p)
        if not 0 < g <= 1:
            raise MomentError("gamma must lie in (0, 1]")
        if not 0 <= p <= 1:
            raise MomentError("p must lie in [0, 1]")
        if self.n is not None:
            if self.n < 2:
                raise MomentError("n must be at least 2")
            if (g * self.n).denominator != 1:
                raise MomentError(f"gamma={g} is not m/n for n={self.n}")

    @property
    def x(self) -> Fraction:
        """Net redundancy ``1/gamma - 1``."""
        return 1 / self.gamma - 1

    @property
    def m(self) -> int | None:
        return None if self.n is None else int(self.gamma * self.n)

    @classmethod
    def from_frame_size(cls, m: int, n: int, p) -> "MomentContext":
        return cls(Fraction(m, n), Fraction(p), n)

    def _need_n(self) -> int:
        if self.n is None:
            raise MomentError("this quantity needs a finite frame size n")
        return self.n


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def ewb_delta(ctx: MomentContext, r: int) -> Fraction:
    """Finite-``n`` correction to the MANOVA moment; nonzero only at ``r = 4``."""
    if r != 4:
        return Fraction(0)
    n = ctx._need_n()
    p, x = ctx.p, ctx.x
    return p**2 * (1 - p) ** 2 * x**2 / (n - 1)


def etf_expected_moment(ctx: MomentContext, r: int) -> Fraction:
    """Exact ``(1/n) E tr((F P F^H)^r)`` for an ETF under Bernoulli(``p``) selection.

    Examples
    --------
    >>> etf_expected_moment(MomentContext(Fraction(1, 2), Fraction(1, 2), 6), 4)
    Fraction(11, 5)
    """
    if r not in (1, 2, 3, 4):
        raise MomentError("exact ETF moments are available for r = 1..4")
    ctx._need_n()
    return manova_moment(ctx.gamma, ctx.p, r) + ewb_delta(ctx, r)


def etf_moment_variance(ctx: MomentContext, r: int) -> Fraction:
    """Exact variance of the sub-frame moment of order 1 or 2.

    The first-order value ``(p - p^2)/n`` holds for any unit-norm frame; the
    second-order one requires an ETF.
    """
    n = ctx._need_n()
    p, x = ctx.p, ctx.x
    if r == 1:
        return (p - p**2) / n
    if r == 2:
        t2 = -1 + 4 * x + 2 * x**2 / (n - 1)
        t3 = 4 * x * (-1 + x * Fraction(n - 2, n - 1))
        t4 = x**2 * Fraction(6 - 4 * n, n - 1)
        return (p + t2 * p**2 + t3 * p**3 + t4 * p**4) / n
    raise MomentError("exact variances are available for r = 1, 2")


def ewb_bound(ctx: MomentContext, r: int) -> Fraction:
    """Erasure Welch bound: the ETF moment, a lower bound for any unit-norm frame."""
    if r not in (2, 3, 4):
        raise MomentError("the erasure Welch bound is defined for r = 2, 3, 4")
    return etf_expected_moment(ctx, r)


def esv_esk_bounds(ctx: MomentContext, form: str = "consistent") -> tuple[float, float]:
    """Lower bounds on the limiting sub-frame spectral variance and kurtosis.

    The kurtosis numerator is the MANOVA central fourth moment. With
    ``form="consistent"`` the denominator is the square of the variance
    bound, as in the kurtosis definition; ``form="printed"`` uses the
    alternative denominator ``p^2 (x^4 + 2x^2 + 1) - p^3 (2x^2 + 2) + p^4``.
    """
    p, x = ctx.p, ctx.x
    if not 0 < p < 1:
        raise MomentError("p must lie strictly between 0 and 1")
    esv = p + (x - 1) * p**2
    num = (
        p
        + p**2 * (6 * x - 4)
        + p**3 * (6 * x**2 - 16 * x + 6)
        + p**4 * (x**3 - 7 * x**2 + 11 * x - 3)
    )
    if form == "consistent":
        den = esv**2
    elif form == "printed":
        den = p**2 * (x**4 + 2 * x**2 + 1) - p**3 * (2 * x**2 + 2) + p**4
    else:
        raise MomentError(f"unknown form {form!r}")
    return float(esv), float(num / den)


# ---------------------------------------------------------------------------
# Exact arithmetic in Q(sqrt(d))
# ---------------------------------------------------------------------------

def _rational_sqrt(d: Fraction) -> Fraction | None:
    a, b = math.isqrt(d.numerator), math.isqrt(d.denominator)
    if a * a == d.numerator and b * b == d.denominator:
        return Fraction(a, b)
    return None


@dataclass(frozen=True)
class Surd:
    """``u + v sqrt(d)`` with rational ``u``, ``v`` and a fixed radicand ``d``.

    When ``d`` is a rational square the value is folded into ``u`` so that
    equality is structural.
    """

    u: Fraction
    v: Fraction
    d: Fraction

    def __post_init__(self):
        u, v, d = Fraction(self.u), Fraction(self.v), Fraction(self.d)
        if d < 0:
            raise MomentError("negative radicand")
        root = _rational_sqrt(d)
        if root is not None and v:
            u, v = u + v * root, Fraction(0)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "d", d)

    @classmethod
    def rational(cls, u, d) -> "Surd":
        return cls(Fraction(u), Fraction(0), d)

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.d != self.d:
                raise MomentError("mixed radicands")
            return other
        return Surd(Fraction(other), Fraction(0), self.d)

    def __add__(self, other):
        o = self._coerce(other)
        return Surd(self.u + o.u, self.v + o.v, self.d)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.u, -self.v, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        o = self._coerce(other)
        return Surd(self.u * o.u + self.v * o.v * self.d, self.u * o.v + self.v * o.u, self.d)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Surd.rational(1, self.d)
        for _ in range(k):
            out = out * self
        return out

    def is_rational(self) -> bool:
        return self.v == 0

    def __float__(self) -> float:
        return float(self.u) + float(self.v) * math.sqrt(self.d)

    def to_dict(self) -> dict:
        return {"u": str(self.u), "v": str(self.v), "radicand": str(self.d)}


@dataclass(frozen=True)
class ASequence:
    """``A_1 .. A_max`` for a given ``gamma``, exact in ``Q(sqrt(1/gamma - 1))``."""

    gamma: Fraction
    values: tuple[Surd, ...]
    convention: str = "printed"

    def __getitem__(self, s: int) -> Surd:
        if not 1 <= s <= len(self.values):
            raise MomentError(f"A_{s} is not available (have 1..{len(self.values)})")
        return self.values[s - 1]

    def __len__(self) -> int:
        return len(self.values)


def a_sequence(gamma, max_s: int, convention: str = "printed") -> ASequence:
    """Cycle values ``A_1 .. A_max_s``.

    ``A_1 = (2 - 1/gamma) / (2 sqrt(1/gamma - 1))`` and ``A_2 = 1``. The
    ``"printed"`` convention continues with ``A_{s+1} = sum_i A_i A_{s+1-i}``
    (at ``gamma = 1/2`` the even terms are the Catalan numbers). The
    ``"signed"`` convention uses ``A_{s+1} = -sum_i A_i A_{s+1-i}``: these are
    the values the partition engine needs to reproduce the MANOVA moments
    (at ``gamma = 1/2`` they are ``(-1)^(s/2-1) C_{s/2-1}``, the free
    cumulants of a symmetric two-point law).
    """
    gamma = Fraction(gamma)
    if not 0 < gamma < 1:
        raise MomentError("the A-sequence needs 0 < gamma < 1")
    if max_s < 2:
        raise MomentError("max_s must be at least 2")
    if convention not in ("printed", "signed"):
        raise MomentError(f"unknown convention {convention!r}")
    sign = 1 if convention == "printed" else -1
    x = 1 / gamma - 1
    # 1/sqrt(x) = sqrt(x)/x
    a = [Surd(0, (2 - 1 / gamma) / (2 * x), x), Surd.rational(1, x)]
    for s in range(2, max_s):
        # A_{s+1} = +- sum_{i=1}^{s} A_i A_{s+1-i}
        acc = sum((a[i - 1] * a[s - i] for i in range(1, s + 1)), Surd.rational(0, x))
        a.append(sign * acc)
    return ASequence(gamma, tuple(a), convention)


# ---------------------------------------------------------------------------
# Partitions and their cactus graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Partition of ``{1..r}`` as a restricted-growth string of block indices."""

    block_of: tuple[int, ...]
    t: int = field(init=False)

    def __post_init__(self):
        seen = -1
        for b in self.block_of:
            if b > seen + 1 or b < 0:
                raise MomentError("block_of is not a restricted-growth string")
            seen = max(seen, b)
        object.__setattr__(self, "t", seen + 1)

    @property
    def r(self) -> int:
        return len(self.block_of)

    def blocks(self) -> list[tuple[int, ...]]:
        out = [[] for _ in range(self.t)]
        for i, b in enumerate(self.block_of, start=1):
            out[b].append(i)
        return [tuple(b) for b in out]

    def __str__(self) -> str:
        return ",".join("".join(str(i) for i in b) for b in self.blocks())

    @classmethod
    def from_blocks(cls, blocks) -> "Partition":
        r = sum(len(b) for b in blocks)
        assign = [0] * r
        for idx, b in enumerate(sorted(blocks, key=min)):
            for i in b:
                assign[i - 1] = idx
        return cls(tuple(assign))


def _check_cap(r: int, cap: int) -> None:
    if cap > PARTITION_HARD_CAP:
        raise MomentError(f"partition cap cannot exceed {PARTITION_HARD_CAP}")
    if r > cap:
        raise MomentError(f"r={r} exceeds the partition cap {cap}")


def _rgs(r: int, t: int) -> Iterator[tuple[int, ...]]:
    # restricted-growth strings of length r using exactly t blocks
    out = [0] * r

    def rec(i, used):
        if r - i < t - used:
            return
        if i == r:
            if used == t:
                yield tuple(out)
            return
        for b in range(min(used + 1, t)):
            out[i] = b
            yield from rec(i + 1, max(used, b + 1))

    if r == 0:
        return
    yield from rec(1, 1)


def enumerate_partitions(r: int, t: int, cap: int = PARTITION_CAP) -> list[Partition]:
    """All partitions of ``{1..r}`` into exactly ``t`` blocks (Stirling ``S(r, t)`` of them)."""
    _check_cap(r, cap)
    if not 1 <= t <= r:
        raise MomentError("need 1 <= t <= r")
    return [Partition(s) for s in _rgs(r, t)]


@dataclass(frozen=True)
class CycleProfile:
    is_noncrossing: bool
    cycle_lengths: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"noncrossing": self.is_noncrossing, "cycles": list(self.cycle_lengths)}


def is_noncrossing(block_of: tuple[int, ...]) -> bool:
    """No ``a < b < c < d`` with ``a, c`` in one block and ``b, d`` in another."""
    r = len(block_of)
    last: dict[int, int] = {}
    for i, b in enumerate(block_of):
        if b in last:
            lo = last[b]
            # every element strictly between two consecutive members of a
            # block must belong to a block living entirely inside (lo, i)
            for k in range(lo + 1, i):
                c = block_of[k]
                if c == b:
                    continue
                first = block_of.index(c)
                final = r - 1 - block_of[::-1].index(c)
                if first < lo or final > i:
                    return False
        last[b] = i
    return True


def _cactus_cycles(t: int, edges: list[tuple[int, int]]) -> list[int]:
    """Cycle lengths of a cactus multigraph via biconnected components.

    Self-loops are cycles of length 1; the remaining edges are split into
    biconnected components (Tarjan, keyed on edge ids so that parallel edges
    are distinguished) and each component must be a simple cycle.
    """
    cycles = []
    adj: list[list[tuple[int, int]]] = [[] for _ in range(t)]
    for eid, (a, b) in enumerate(edges):
        if a == b:
            cycles.append(1)
        else:
            adj[a].append((b, eid))
            adj[b].append((a, eid))

    disc = [-1] * t
    low = [0] * t
    counter = [0]
    stack: list[tuple[int, int, int]] = []

    def pop_component(until_eid):
        verts, n_edges = set(), 0
        while True:
            a, b, eid = stack.pop()
            verts.update((a, b))
            n_edges += 1
            if eid == until_eid:
                break
        if len(verts) != n_edges:
            raise MomentError("graph is not a cactus (component is not a cycle)")
        cycles.append(n_edges)

    def dfs(v, parent_eid):
        disc[v] = low[v] = counter[0]
        counter[0] += 1
        for w, eid in adj[v]:
            if eid == parent_eid:
                continue
            if disc[w] == -1:
                stack.append((v, w, eid))
                dfs(w, eid)
                low[v] = min(low[v], low[w])
                if low[w] >= disc[v]:
                    pop_component(eid)
            elif disc[w] < disc[v]:
                stack.append((v, w, eid))
                low[v] = min(low[v], disc[w])

    for v in range(t):
        if disc[v] == -1 and adj[v]:
            dfs(v, -1)
    return cycles


def classify(pi: Partition) -> CycleProfile:
    """Crossing test and, for non-crossing partitions, the cactus cycle lengths."""
    if not is_noncrossing(pi.block_of):
        return CycleProfile(False)
    r = pi.r
    edges = [(pi.block_of[i], pi.block_of[(i + 1) % r]) for i in range(r)]
    lengths = _cactus_cycles(pi.t, edges)
    if sum(lengths) != r:
        raise MomentError("cycle lengths do not add up to r")
    return CycleProfile(True, tuple(sorted(lengths, reverse=True)))


def partition_value(profile: CycleProfile, a: ASequence) -> Surd:
    """``prod_{s in cyc(pi)} A_s``; zero for crossing partitions."""
    d = a[1].d
    if not profile.is_noncrossing:
        return Surd.rational(0, d)
    out = Surd.rational(1, d)
    for s in profile.cycle_lengths:
        out = out * a[s]
    return out


@lru_cache(maxsize=None)
def profile_counts(r: int) -> dict[int, Counter]:
    """For each block count ``t``, how many non-crossing partitions have each cycle profile.

    Depends only on ``r``, so one enumeration serves every ``gamma``.
    """
    _check_cap(r, PARTITION_HARD_CAP)
    out: dict[int, Counter] = {}
    for t in range(1, r + 1):
        c = Counter()
        for s in _rgs(r, t):
            prof = classify(Partition(s))
            if prof.is_noncrossing:
                c[prof.cycle_lengths] += 1
        out[t] = c
    return out


# ---------------------------------------------------------------------------
# Moment polynomials
# ---------------------------------------------------------------------------

PPoly = dict  # block count t -> coefficient of p^t


def central_moment(
    ctx: MomentContext, r: int, cap: int = PARTITION_CAP, convention: str = "signed"
) -> dict[int, Surd]:
    """Centralized asymptotic moment as a polynomial in ``p``.

    ``sum_t (sum_{pi in Pi(r, t)} V(pi)) p^t`` with coefficients in
    ``Q(sqrt(x))``; returned as ``{t: coefficient}``. ``convention`` selects
    the cycle values (see :func:`a_sequence`).
    """
    _check_cap(r, cap)
    a = a_sequence(ctx.gamma, max(r, 2), convention)
    d = ctx.x
    poly = {}
    for t, counts in profile_counts(r).items():
        coef = Surd.rational(0, d)
        for lengths, count in counts.items():
            coef = coef + count * partition_value(CycleProfile(True, lengths), a)
        poly[t] = coef
    return poly


def asymptotic_moment(
    ctx: MomentContext, r: int, cap: int = PARTITION_CAP, convention: str = "signed"
) -> dict[int, Fraction]:
    """Limiting ETF sub-frame moment of order ``r`` as a polynomial in ``p``.

    ``(1/(2 gamma))^r p + sum_j C(r, j) x^(j/2) (1/(2 gamma))^(r-j) m_central_j``.
    Raises if any ``sqrt(x)`` component survives.
    """
    _check_cap(r, cap)
    if r < 1:
        raise MomentError("r must be positive")
    d = ctx.x
    half = 1 / (2 * ctx.gamma)
    root = Surd(0, 1, d)
    poly: dict[int, Surd] = {1: Surd.rational(half**r, d)}
    for j in range(1, r + 1):
        scale = math.comb(r, j) * root**j * half ** (r - j)
        for t, c in central_moment(ctx, j, cap, convention).items():
            poly[t] = poly.get(t, Surd.rational(0, d)) + scale * c
    out = {}
    for t, c in sorted(poly.items()):
        if not c.is_rational():
            raise MomentError(f"irrational coefficient of p^{t} at r={r}: {c}")
        if c.u:
            out[t] = c.u
    return out


def eval_poly(poly: dict[int, Fraction], p) -> Fraction:
    return sum((c * Fraction(p) ** t for t, c in poly.items()), Fraction(0))


def poly_to_json(poly: dict[int, Fraction]) -> list[dict]:
    return [
        {"power": t, "numerator": str(c.numerator), "denominator": str(c.denominator)}
        for t, c in sorted(poly.items())
    ]


@dataclass(frozen=True)
class IdentityVerdict:
    r: int
    engine: Fraction
    manova: Fraction

    @property
    def equal(self) -> bool:
        return self.engine == self.manova

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "engine": str(self.engine),
            "manova": str(self.manova),
            "equal": self.equal,
        }


def manova_identity_check(
    ctx: MomentContext, r_max: int, cap: int = PARTITION_CAP, convention: str = "signed"
) -> list[IdentityVerdict]:
    """Compare the recursive engine with the Narayana MANOVA moments, exactly."""
    _check_cap(r_max, cap)
    out = []
    for r in range(1, r_max + 1):
        engine = eval_poly(asymptotic_moment(ctx, r, cap, convention), ctx.p)
        out.append(IdentityVerdict(r, engine, manova_moment(ctx.gamma, ctx.p, r)))
    return out
