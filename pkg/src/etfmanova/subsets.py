"""Sub-frame selection, sub-frame Gram/Hessian extraction, exact enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Union

import numpy as np

from .frames import Frame
from .numerics import RngStream, herm_eigvals

BERNOULLI_MAX_N = 24
COMBINATORIAL_MAX_SUBSETS = 10**6
_CHUNK = 4096


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectionModel:
    mode: str
    k: int | None = None
    p: float | None = None

    def __post_init__(self):
        if self.mode == "combinatorial":
            if self.k is None or self.k < 1:
                raise SelectionError("combinatorial selection needs k >= 1")
        elif self.mode == "bernoulli":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise SelectionError("bernoulli selection needs 0 <= p <= 1")
        else:
            raise SelectionError(f"unknown selection mode {self.mode!r}")

    @classmethod
    def combinatorial(cls, k: int) -> "SelectionModel":
        return cls("combinatorial", k=int(k))

    @classmethod
    def bernoulli(cls, p: float) -> "SelectionModel":
        return cls("bernoulli", p=float(p))

    @classmethod
    def parse(cls, text: str) -> "SelectionModel":
        """Parse the CLI forms ``comb:k`` and ``bern:p`` (``p`` may be ``a/b``)."""
        kind, _, value = text.partition(":")
        if kind == "comb":
            return cls.combinatorial(int(value))
        if kind == "bern":
            from fractions import Fraction

            return cls.bernoulli(float(Fraction(value)))
        raise SelectionError(f"selection must be comb:k or bern:p, got {text!r}")

    def check(self, n: int) -> None:
        if self.mode == "combinatorial" and self.k > n:
            raise SelectionError(f"k={self.k} exceeds n={n}")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "k": self.k, "p": self.p}


@dataclass(frozen=True)
class SelectionMask:
    n: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise SelectionError("mask indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.n):
            raise SelectionError("mask index out of range")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    @classmethod
    def full(cls, n: int) -> "SelectionMask":
        return cls(n, tuple(range(n)))

    def to_json(self) -> list[int]:
        # one-based on the wire, matching the "indices in 1..n" convention
        return [i + 1 for i in self.indices]

    @classmethod
    def from_json(cls, n: int, data: list[int]) -> "SelectionMask":
        return cls(n, tuple(sorted(int(i) - 1 for i in data)))


def draw(model: SelectionModel, n: int, rng: RngStream | np.random.Generator) -> SelectionMask:
    """Draw a random mask: uniform ``k``-subset or i.i.d. Bernoulli(``p``)."""
    model.check(n)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if model.mode == "bernoulli":
        picked = np.flatnonzero(gen.random(n) < model.p)
        return SelectionMask(n, tuple(picked.tolist()))
    # partial Fisher-Yates
    perm = np.arange(n)
    k = model.k
    for i in range(k):
        j = int(gen.integers(i, n))
        perm[i], perm[j] = perm[j], perm[i]
    return SelectionMask(n, tuple(sorted(perm[:k].tolist())))


@dataclass(frozen=True)
class SubFrame:
    gram: np.ndarray
    hessian: np.ndarray
    empty: bool


def subframe_gram(f: Frame, s: SelectionMask) -> SubFrame:
    """Gram ``F_S^H F_S`` (k x k) and Hessian ``F_S F_S^H`` (m x m) of a sub-frame."""
    if s.n != f.n:
        raise SelectionError(f"mask is for n={s.n}, frame has n={f.n}")
    if not len(s):
        return SubFrame(np.zeros((0, 0)), np.zeros((f.m, f.m)), True)
    fs = f.columns(s.array)
    g = fs.conj().T @ fs
    g = 0.5 * (g + g.conj().T)
    np.fill_diagonal(g, np.real(np.diagonal(g)))
    h = fs @ fs.conj().T
    return SubFrame(g, 0.5 * (h + h.conj().T), False)


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------

def _gray_masks(n: int) -> Iterator[int]:
    for i in range(2**n):
        yield i ^ (i >> 1)


def _bits(code: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if code >> i & 1)


def enumerate_masks(model: SelectionModel, n: int) -> Iterator[tuple[SelectionMask, float]]:
    """Yield every mask with its probability under ``model``.

    Bernoulli masks come in Gray-code order; combinatorial ones in
    lexicographic order with equal weights.
    """
    model.check(n)
    if model.mode == "bernoulli":
        if n > BERNOULLI_MAX_N:
            raise SelectionError(f"bernoulli enumeration capped at n <= {BERNOULLI_MAX_N}")
        p = model.p
        for code in _gray_masks(n):
            idx = _bits(code, n)
            k = len(idx)
            yield SelectionMask(n, idx), p**k * (1.0 - p) ** (n - k)
    else:
        total = math.comb(n, model.k)
        if total > COMBINATORIAL_MAX_SUBSETS:
            raise SelectionError(f"C({n},{model.k}) = {total} exceeds the enumeration cap")
        w = 1.0 / total
        for idx in itertools.combinations(range(n), model.k):
            yield SelectionMask(n, idx), w


Stat = Union[str, Callable[[Frame, SelectionMask], "float | np.ndarray"]]


def trace_power_stat(r: int | tuple[int, ...]) -> Callable:
    """``(1/n) tr(G_S^r)`` for one order or a tuple of orders."""
    orders = np.atleast_1d(np.asarray(r, dtype=int))

    def stat(f: Frame, s: SelectionMask):
        if not len(s):
            vals = np.zeros(len(orders))
        else:
            lam = herm_eigvals(subframe_gram(f, s).gram)
            vals = np.array([np.sum(lam**q) for q in orders]) / f.n
        return vals if np.ndim(r) else float(vals[0])

    return stat


def _resolve(stat: Stat) -> Callable:
    if callable(stat):
        return stat
    name, _, arg = stat.partition(":")
    if name == "moment":
        return trace_power_stat(int(arg))
    if name == "size_fraction":
        return lambda f, s: len(s) / f.n
    if name == "trace":
        return lambda f, s: (float(np.real(np.trace(subframe_gram(f, s).gram))) / f.n)
    raise SelectionError(f"unknown statistic {stat!r}")


def _weighted_fsum(weights: list[float], values: list) -> np.ndarray:
    w = np.asarray(weights)
    v = np.asarray(values)
    flat = v.reshape(len(w), -1)
    out = []
    for col in flat.T:
        terms = w * col
        if np.iscomplexobj(terms):
            out.append(complex(math.fsum(terms.real), math.fsum(terms.imag)))
        else:
            out.append(math.fsum(terms))
    return np.asarray(out).reshape(v.shape[1:])


def _enumerate_stat(f: Frame, model: SelectionModel, stat: Stat):
    fn = _resolve(stat)
    weights, values = [], []
    partials_w, partials_v = [], []
    for mask, w in enumerate_masks(model, f.n):
        weights.append(w)
        values.append(fn(f, mask))
        if len(weights) == _CHUNK:
            partials_w.append(weights)
            partials_v.append(values)
            weights, values = [], []
    if weights:
        partials_w.append(weights)
        partials_v.append(values)
    return partials_w, partials_v


def exact_expectation(f: Frame, model: SelectionModel, stat: Stat):
    """Exact expectation of a subset statistic by exhaustive enumeration.

    ``stat`` is a callable ``(frame, mask) -> float | ndarray`` or one of the
    names ``"moment:r"``, ``"size_fraction"``, ``"trace"``. Sums are
    compensated (``math.fsum``) per fixed-size chunk and then across chunks.
    """
    return exact_mean_variance(f, model, stat)[0]


def exact_mean_variance(f: Frame, model: SelectionModel, stat: Stat):
    """Exact mean and variance (two-pass) of a real subset statistic."""
    pw, pv = _enumerate_stat(f, model, stat)
    mean = _fsum_chunks([_weighted_fsum(w, v) for w, v in zip(pw, pv)])
    dev = [
        _weighted_fsum(w, (np.abs(np.asarray(v) - mean) ** 2).tolist()) for w, v in zip(pw, pv)
    ]
    var = _fsum_chunks(dev)
    if np.ndim(mean) == 0:
        return _scalar(mean), float(np.real(var))
    return mean, np.real(var)


def _fsum_chunks(parts: list[np.ndarray]) -> np.ndarray:
    stack = np.asarray(parts)
    if np.iscomplexobj(stack):
        re = np.apply_along_axis(math.fsum, 0, stack.real)
        im = np.apply_along_axis(math.fsum, 0, stack.imag)
        return re + 1j * im
    if stack.ndim == 1:
        return np.asarray(math.fsum(stack))
    return np.apply_along_axis(math.fsum, 0, stack)


def _scalar(x):
    x = complex(x) if np.iscomplexobj(x) else float(x)
    return x


def mean_hessian(f: Frame, model: SelectionModel) -> np.ndarray:
    """Exact mean of ``F_S F_S^H`` over the selection model."""
    return exact_expectation(f, model, lambda fr, s: subframe_gram(fr, s).hessian)
