"""Unit-norm frame construction, diagnostics and JSON serialization.

A frame is an ``m x n`` complex matrix whose ``n`` columns have unit norm.
:func:`build` dispatches on a family tag:

=================  =====================================================
lpf                first ``m`` non-DC rows of the ``n``-point DFT
dss                DFT rows indexed by a difference set (or quadratic
                   residues mod a prime ``q = 3 mod 4``)
paley_real         real ETF from a symmetric conference matrix,
                   ``q = 1 mod 4`` prime power
paley_complex      complex ETF from a skew conference matrix,
                   ``q = 3 mod 4`` prime power
steiner_pairs      Steiner ETF of the all-pairs design on ``v`` points
spikes_fourier     ``[I | DFT]``
spikes_hadamard    ``[I | Sylvester-Hadamard]``
union_bases        concatenated orthonormal bases (repetition frame)
iid_gaussian       i.i.d. Gaussian columns, normalized
haar               rows of a Haar unitary, refined to unit-norm tight
rand_dft           random ``m`` rows of the ``n``-point DFT
rand_dct           random ``m`` rows of the orthonormal DCT-II
=================  =====================================================
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.fft
import scipy.linalg

from ._galois import GaloisField, is_prime, prime_power
from .numerics import RngStream, herm_eig

UNIT_NORM_TOL = 1e-12
READ_UNIT_NORM_TOL = 1e-9
FLAG_TOL = 1e-9

RANDOM_FAMILIES = {"iid_gaussian", "haar", "rand_dft", "rand_dct"}
FAMILIES = (
    "lpf",
    "dss",
    "paley_real",
    "paley_complex",
    "steiner_pairs",
    "spikes_fourier",
    "spikes_hadamard",
    "union_bases",
    "iid_gaussian",
    "haar",
    "rand_dft",
    "rand_dct",
    "seidel",
)


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    matrix: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)
    unit_norm_tol: float = UNIT_NORM_TOL

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2:
            raise FrameError("frame matrix must be 2-D")
        m, n = mat.shape
        if not 1 <= m <= n:
            raise FrameError(f"need n >= m >= 1, got {m}x{n}")
        if not np.all(np.isfinite(mat)):
            raise FrameError("frame has non-finite entries")
        dev = np.max(np.abs(np.linalg.norm(mat, axis=0) - 1.0))
        if dev > self.unit_norm_tol:
            raise FrameError(f"columns are not unit norm (max deviation {dev:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def gamma(self) -> float:
        return self.m / self.n

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.imag)

    def gram(self) -> np.ndarray:
        f = self.matrix
        return f.conj().T @ f

    def hessian(self) -> np.ndarray:
        f = self.matrix
        return f @ f.conj().T

    def columns(self, idx) -> np.ndarray:
        return self.matrix[:, np.asarray(idx, dtype=int)]

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "family": self.family,
            "params": self.params,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict, unit_norm_tol: float = READ_UNIT_NORM_TOL) -> "Frame":
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != (data["m"], data["n"]) or im.shape != re.shape:
            raise FrameError("frame JSON shape does not match m, n")
        return cls(re + 1j * im, data.get("family", "custom"), data.get("params", {}), unit_norm_tol)


def save_frame(frame: Frame, path: str | Path) -> None:
    Path(path).write_text(json.dumps(frame.to_json()))


def load_frame(path: str | Path, unit_norm_tol: float = READ_UNIT_NORM_TOL) -> Frame:
    return Frame.from_json(json.loads(Path(path).read_text()), unit_norm_tol)


def _normalize_columns(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=0)
    if np.any(norms < 1e-12):
        raise FrameError("construction produced a zero column")
    return mat / norms


def dft_matrix(n: int) -> np.ndarray:
    """Unnormalized ``n``-point DFT, entry ``(k, t) = exp(-2 pi j k t / n)``."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def sylvester_hadamard(n: int) -> np.ndarray:
    if n < 1 or n & (n - 1):
        raise FrameError(f"Sylvester-Hadamard order must be a power of 2, got {n}")
    return scipy.linalg.hadamard(n).astype(float)


def frame_from_gram(gram: np.ndarray, rank: int | None = None, **meta) -> Frame:
    """Factor a PSD Gram matrix ``G = F^H F`` keeping its top ``rank`` eigenpairs."""
    w, v = herm_eig(gram)
    if rank is None:
        rank = int(np.sum(w > 1e-9 * max(w[-1], 1.0)))
    top = slice(len(w) - rank, len(w))
    f = np.sqrt(np.clip(w[top], 0.0, None))[:, None] * v[:, top].conj().T
    # eigenvector phases are arbitrary; fix each row so its first nonzero entry is real positive
    for row in f:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size:
            row *= np.conj(row[nz[0]]) / abs(row[nz[0]])
    if not np.iscomplexobj(gram) or not np.any(np.imag(gram)):
        f = f.real
    return Frame(_normalize_columns(f), **meta)


def seidel_frame(seidel: np.ndarray, **meta) -> Frame:
    """Real or complex ETF whose Gram is ``I + nu S`` for a Seidel matrix ``S``.

    ``nu`` is chosen so that ``I + nu S`` is singular, i.e. ``nu = -1/lambda_min(S)``.
    """
    s = np.asarray(seidel)
    w = np.linalg.eigvalsh(s)
    nu = -1.0 / w[0]
    n = s.shape[0]
    rank = int(np.sum(np.abs(1.0 + nu * w) > 1e-9))
    return frame_from_gram(np.eye(n) + nu * s, rank, **meta)


PENTAGON_SEIDEL = np.array(
    [
        [0, 1, 1, 1, 1, 1],
        [1, 0, -1, 1, 1, -1],
        [1, -1, 0, -1, 1, 1],
        [1, 1, -1, 0, -1, 1],
        [1, 1, 1, -1, 0, -1],
        [1, -1, 1, 1, -1, 0],
    ],
    dtype=float,
)


def pentagon_etf() -> Frame:
    """The 3 x 6 real ETF with Gram ``I + S / sqrt(5)`` (icosahedron lines)."""
    return seidel_frame(PENTAGON_SEIDEL, family="seidel", params={"graph": "pentagon"})


def mercedes_benz() -> Frame:
    s3 = math.sqrt(3) / 2
    return Frame(np.array([[1.0, -0.5, -0.5], [0.0, s3, -s3]]), "custom", {"name": "mercedes_benz"})


# ---------------------------------------------------------------------------
# Difference sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DifferenceSet:
    modulus: int
    elements: tuple[int, ...]
    lam: int | None = None

    def __post_init__(self):
        if self.modulus < 1:
            raise FrameError("modulus must be positive")
        elems = tuple(sorted(int(e) % self.modulus for e in self.elements))
        if len(set(elems)) != len(elems):
            raise FrameError("difference set elements must be distinct residues")
        object.__setattr__(self, "elements", elems)


def validate_difference_set(d: DifferenceSet) -> tuple[bool, int | None]:
    """Check that every nonzero residue is a difference exactly ``lambda`` times."""
    n = d.modulus
    counts = np.zeros(n, dtype=int)
    for a, b in itertools.permutations(d.elements, 2):
        counts[(a - b) % n] += 1
    nonzero = counts[1:]
    if n == 1:
        return True, 0
    lam = int(nonzero[0])
    ok = bool(np.all(nonzero == lam))
    k = len(d.elements)
    if ok and k * (k - 1) != lam * (n - 1):
        ok = False
    return (ok, lam) if ok else (False, None)


def quadratic_residues(q: int) -> tuple[int, ...]:
    return tuple(sorted({(x * x) % q for x in range(1, q)}))


# ---------------------------------------------------------------------------
# Family builders
# ---------------------------------------------------------------------------

def _need(params: dict, *names: str):
    missing = [k for k in names if k not in params]
    if missing:
        raise FrameError(f"missing parameters: {', '.join(missing)}")
    return [params[k] for k in names]


def _lpf(params, rng):
    m, n = (int(v) for v in _need(params, "m", "n"))
    if not 1 <= m <= n:
        raise FrameError("lpf needs 1 <= m <= n")
    rows = np.arange(1, m + 1)
    t = np.arange(n)
    mat = np.exp(-2j * np.pi * np.outer(rows, t) / n) / math.sqrt(m)
    return Frame(mat, "lpf", {"m": m, "n": n})


def _harmonic(n: int, rows, family: str, params: dict) -> Frame:
    rows = np.asarray(rows)
    t = np.arange(n)
    mat = np.exp(2j * np.pi * np.outer(rows, t) / n) / math.sqrt(len(rows))
    return Frame(mat, family, params)


def _dss(params, rng):
    if params.get("mode") == "qr" or ("q" in params and "set" not in params):
        (q,) = _need(params, "q")
        q = int(q)
        if not is_prime(q) or q % 4 != 3:
            raise FrameError(f"dss qr mode needs a prime q = 3 mod 4, got {q}")
        elems = quadratic_residues(q)
        ds = DifferenceSet(q, elems)
    else:
        modulus, elems = _need(params, "modulus", "set")
        ds = DifferenceSet(int(modulus), tuple(elems))
    ok, lam = validate_difference_set(ds)
    if not ok:
        raise FrameError(f"{ds.elements} is not a difference set mod {ds.modulus}")
    if len(ds.elements) > ds.modulus or not ds.elements:
        raise FrameError("difference set size must be in 1..modulus")
    meta = {"modulus": ds.modulus, "set": list(ds.elements), "lambda": lam}
    if "q" in params:
        meta["q"] = int(params["q"])
        meta["mode"] = "qr"
    return _harmonic(ds.modulus, ds.elements, "dss", meta)


def conference_matrix(q: int) -> np.ndarray:
    """Paley conference matrix of order ``q + 1``: symmetric if ``q = 1 mod 4``, skew if ``q = 3 mod 4``."""
    if prime_power(q) is None or q % 2 == 0:
        raise FrameError(f"q must be an odd prime power, got {q}")
    field_ = GaloisField(q)
    jac = np.array([[field_.chi(field_.sub(j, i)) for j in range(q)] for i in range(q)], dtype=float)
    c = np.zeros((q + 1, q + 1))
    c[0, 1:] = 1.0
    c[1:, 0] = 1.0 if q % 4 == 1 else -1.0
    c[1:, 1:] = jac
    return c


def _paley_real(params, rng):
    (q,) = _need(params, "q")
    q = int(q)
    if q % 4 != 1 or prime_power(q) is None:
        raise FrameError(f"paley_real needs a prime power q = 1 mod 4, got {q}")
    c = conference_matrix(q)
    gram = np.eye(q + 1) + c / math.sqrt(q)
    return frame_from_gram(gram, (q + 1) // 2, family="paley_real", params={"q": q})


def _paley_complex(params, rng):
    (q,) = _need(params, "q")
    q = int(q)
    if q % 4 != 3 or prime_power(q) is None:
        raise FrameError(f"paley_complex needs a prime power q = 3 mod 4, got {q}")
    c = conference_matrix(q)
    gram = np.eye(q + 1) + 1j * c / math.sqrt(q)
    return frame_from_gram(gram, (q + 1) // 2, family="paley_complex", params={"q": q})


def _steiner_pairs(params, rng):
    (v,) = _need(params, "v")
    v = int(v)
    if v < 2:
        raise FrameError("steiner_pairs needs v >= 2")
    blocks = list(itertools.combinations(range(v), 2))
    r = v - 1
    h = dft_matrix(v).conj()  # rows: 1, w, w^2 ... with w = exp(2 pi j / v)
    mat = np.zeros((len(blocks), v * (r + 1)), dtype=complex)
    for x in range(v):
        containing = [b for b, blk in enumerate(blocks) if x in blk]
        for z in range(r + 1):
            col = x * (r + 1) + z
            for row, b in enumerate(containing, start=1):
                mat[b, col] = h[row, z]
    return Frame(mat / math.sqrt(r), "steiner_pairs", {"v": v})


def _spikes_fourier(params, rng):
    (m,) = _need(params, "m")
    m = int(m)
    mat = np.hstack([np.eye(m), dft_matrix(m) / math.sqrt(m)])
    return Frame(mat, "spikes_fourier", {"m": m})


def _spikes_hadamard(params, rng):
    (m,) = _need(params, "m")
    m = int(m)
    mat = np.hstack([np.eye(m), sylvester_hadamard(m) / math.sqrt(m)])
    return Frame(mat, "spikes_hadamard", {"m": m})


def _basis(name: str, m: int) -> np.ndarray:
    if name == "identity":
        return np.eye(m)
    if name == "dft":
        return dft_matrix(m) / math.sqrt(m)
    if name == "hadamard":
        return sylvester_hadamard(m) / math.sqrt(m)
    raise FrameError(f"unknown basis {name!r}")


def _union_bases(params, rng):
    (m,) = _need(params, "m")
    m = int(m)
    bases = params.get("bases")
    if bases is None:
        bases = ["identity"] * int(params.get("copies", 2))
    mat = np.hstack([_basis(b, m) for b in bases])
    return Frame(mat, "union_bases", {"m": m, "bases": list(bases)})


def _require_rng(rng, family):
    if rng is None:
        raise FrameError(f"family {family!r} is random and needs an rng stream")
    return rng.generator()


def _iid_gaussian(params, rng):
    m, n = (int(v) for v in _need(params, "m", "n"))
    gen = _require_rng(rng, "iid_gaussian")
    real = bool(params.get("real", True))
    mat = gen.standard_normal((m, n))
    if not real:
        mat = mat + 1j * gen.standard_normal((m, n))
    return Frame(_normalize_columns(mat), "iid_gaussian", {"m": m, "n": n, "real": real, **_seed_meta(rng)})


def haar_unitary(n: int, gen: np.random.Generator, real: bool = False) -> np.ndarray:
    z = gen.standard_normal((n, n))
    if not real:
        z = (z + 1j * gen.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def unit_norm_tight_refine(mat: np.ndarray, tol: float = 1e-13, max_iter: int = 10_000) -> np.ndarray:
    """Alternate between unit-norm columns and the nearest tight frame."""
    m, n = mat.shape
    f = _normalize_columns(mat)
    for _ in range(max_iter):
        u, _, vh = np.linalg.svd(f, full_matrices=False)
        f = math.sqrt(n / m) * (u @ vh)
        norms = np.linalg.norm(f, axis=0)
        if np.max(np.abs(norms - 1.0)) < tol:
            return f / norms
        f = f / norms
    raise FrameError("unit-norm tight refinement did not converge")


def _haar(params, rng):
    m, n = (int(v) for v in _need(params, "m", "n"))
    gen = _require_rng(rng, "haar")
    real = bool(params.get("real", False))
    rows = haar_unitary(n, gen, real)[:m] * math.sqrt(n / m)
    refine = bool(params.get("refine", True))
    mat = unit_norm_tight_refine(rows) if refine else _normalize_columns(rows)
    return Frame(mat, "haar", {"m": m, "n": n, "real": real, "refine": refine, **_seed_meta(rng)})


def _rand_rows(n, m, gen):
    if not 1 <= m <= n:
        raise FrameError("need 1 <= m <= n")
    return np.sort(gen.choice(n, size=m, replace=False))


def _rand_dft(params, rng):
    m, n = (int(v) for v in _need(params, "m", "n"))
    rows = _rand_rows(n, m, _require_rng(rng, "rand_dft"))
    mat = dft_matrix(n)[rows] / math.sqrt(m)
    return Frame(mat, "rand_dft", {"m": m, "n": n, "rows": rows.tolist(), **_seed_meta(rng)})


def _rand_dct(params, rng):
    m, n = (int(v) for v in _need(params, "m", "n"))
    rows = _rand_rows(n, m, _require_rng(rng, "rand_dct"))
    dct = scipy.fft.dct(np.eye(n), type=2, norm="ortho", axis=0)
    mat = _normalize_columns(dct[rows])
    return Frame(mat, "rand_dct", {"m": m, "n": n, "rows": rows.tolist(), **_seed_meta(rng)})


def _seidel(params, rng):
    # default: the pentagon Seidel matrix (the 3 x 6 real ETF)
    mat = params.get("matrix")
    if mat is None:
        return pentagon_etf()
    return seidel_frame(np.asarray(mat, dtype=float), family="seidel", params={"matrix": mat})


def _seed_meta(rng: RngStream) -> dict:
    return {"seed": rng.master_seed, "stream": rng.stream_index}


_BUILDERS = {
    "lpf": _lpf,
    "dss": _dss,
    "paley_real": _paley_real,
    "paley_complex": _paley_complex,
    "steiner_pairs": _steiner_pairs,
    "spikes_fourier": _spikes_fourier,
    "spikes_hadamard": _spikes_hadamard,
    "union_bases": _union_bases,
    "iid_gaussian": _iid_gaussian,
    "haar": _haar,
    "rand_dft": _rand_dft,
    "rand_dct": _rand_dct,
    "seidel": _seidel,
}


def build(family: str, params: dict[str, Any] | None = None, rng: RngStream | None = None) -> Frame:
    """Construct a frame of the given family.

    Examples
    --------
    >>> f = build("dss", {"modulus": 7, "set": [1, 2, 4]})
    >>> f.m, f.n
    (3, 7)
    """
    try:
        builder = _BUILDERS[family]
    except KeyError:
        raise FrameError(f"unknown frame family {family!r}") from None
    return builder(dict(params or {}), rng)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameDiagnostics:
    coherence: float
    welch_max_bound: float
    welch_ms_lhs: float
    welch_ms_rhs: float
    tightness_residual: float
    equiangular_residual: float
    is_tight: bool
    is_etf: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def welch_max_bound(m: int, n: int) -> float:
    return math.sqrt((n - m) / (m * (n - 1))) if n > 1 else 0.0


def diagnostics(f: Frame) -> FrameDiagnostics:
    m, n = f.m, f.n
    absg = np.abs(f.gram())
    off = absg[~np.eye(n, dtype=bool)]
    if n > 1:
        coherence = float(off.max())
        lhs = float(np.sum(off**2) / (n * (n - 1)))
        rhs = (n - m) / ((n - 1) * m)
        eq_res = float(np.max(np.abs(off - off.mean())))
    else:
        coherence, lhs, rhs, eq_res = 0.0, 0.0, 0.0, 0.0
    tight_res = float(np.max(np.abs(f.hessian() - (n / m) * np.eye(m))))
    is_tight = tight_res <= FLAG_TOL
    return FrameDiagnostics(
        coherence=min(coherence, 1.0),
        welch_max_bound=welch_max_bound(m, n),
        welch_ms_lhs=lhs,
        welch_ms_rhs=rhs,
        tightness_residual=tight_res,
        equiangular_residual=eq_res,
        is_tight=is_tight,
        is_etf=is_tight and eq_res <= FLAG_TOL,
    )
