"""Spectral machinery for penalized smoothing on an equidistant design.

The smoother of order ``q`` diagonalizes in an orthonormal basis ``Phi`` with
eigenvalue sequence ``n*eta_{q,i}``: the first ``floor(q)`` eigenvalues vanish
(the null space) and the rest grow like ``pi^(2q) * (i - q)^(2q)``.  Two
backends are provided:

* ``analytic-surrogate`` -- an orthonormal cosine transform (DCT-II family)
  paired with the asymptotic eigenvalue formula.  All selection criteria
  downstream depend on the data only through the transformed coefficients and
  the eigenvalue sequence, so this is the production backend for every order.
* ``exact-eigen`` -- a dense eigendecomposition of a directly assembled
  finite-difference penalty smoother.  Only orders 1 and 2 and small designs
  are supported; it serves as an independent test oracle, and its null space
  contains polynomials exactly.

The package-wide norm convention is ``rms_norm``: ``||v||^2 = mean(v_i^2)``,
so spectral and design-domain computations coincide under the orthonormal
transform.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, idct

from .errors import EbsplinesError, UnsupportedBackendError

ANALYTIC = "analytic-surrogate"
EXACT = "exact-eigen"

_EXACT_MAX_N = 512
_ORTHO_TOL = 1e-10


def rms_norm(v) -> float:
    """Root-mean-square norm, ||v||^2 = (1/n) sum v_i^2.

    This is the single norm convention used for fitted-value errors, credible
    ball radii and coverage checks throughout the package.
    """
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean(v * v)))


@dataclass(frozen=True)
class DesignGrid:
    """Equidistant design sites on (0, 1]."""

    n: int
    convention: str
    x: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise EbsplinesError(f"need n >= 1, got {self.n}")
        if len(self.x) != self.n:
            raise EbsplinesError("grid length mismatch")
        if not (np.all(np.diff(self.x) > 0) and self.x[0] > 0 and self.x[-1] <= 1):
            raise EbsplinesError("design sites must be increasing and in (0, 1]")


def design_grid(n: int, convention: str = "midpoint") -> DesignGrid:
    """Build the design grid: midpoint x_i = (2i-1)/(2n) or right x_i = i/n."""
    i = np.arange(1, n + 1, dtype=float)
    if convention == "midpoint":
        x = (2.0 * i - 1.0) / (2.0 * n)
    elif convention == "right":
        x = i / n
    else:
        raise EbsplinesError(f"unknown design convention {convention!r}")
    return DesignGrid(n=n, convention=convention, x=x)


@dataclass(frozen=True)
class EigenSequence:
    """Eigenvalues n*eta_{q, 1..n} of the order-q penalty, ascending."""

    q: float
    n: int
    values: np.ndarray

    @property
    def null_dim(self) -> int:
        return int(math.floor(self.q))

    @property
    def tail(self) -> np.ndarray:
        """Eigenvalues beyond the null space."""
        return self.values[self.null_dim:]


def eigenvalues(q: float, n: int) -> EigenSequence:
    """Asymptotic eigenvalue sequence n*eta_{q,i} = pi^(2q) (i-q)^(2q).

    The first floor(q) entries are exactly zero.  Non-integer q uses the same
    formula with a real exponent and offset.
    """
    if not q > 0.5:
        raise EbsplinesError(f"penalty order must exceed 1/2, got {q}")
    if n < 4:
        raise EbsplinesError(f"need n >= 4, got {n}")
    d = int(math.floor(q))
    if n <= 2 * d:
        raise EbsplinesError(f"n = {n} too small for order q = {q}")
    i = np.arange(1, n + 1, dtype=float)
    vals = np.zeros(n)
    vals[d:] = np.pi ** (2.0 * q) * (i[d:] - q) ** (2.0 * q)
    return EigenSequence(q=float(q), n=n, values=vals)


@dataclass(frozen=True)
class BasisHandle:
    """Orthonormal transform Phi plus bookkeeping.

    ``forward`` applies Phi^T (analysis), ``inverse`` applies Phi (synthesis).
    For the exact backend, ``exact_eigenvalues`` carries the eigensolve's own
    n*eta sequence.
    """

    kind: str
    n: int
    q_degree: int
    _matrix: np.ndarray | None = field(default=None, repr=False)
    exact_eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        """Dense Phi (n x n); built on demand for the analytic backend."""
        if self._matrix is not None:
            return self._matrix
        return _dct_matrix(self.n)

    def forward(self, y) -> np.ndarray:
        """Spectral coefficients X = Phi^T y.  Accepts (..., n) arrays."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.n:
            raise EbsplinesError(f"expected length {self.n}, got {y.shape[-1]}")
        if self.kind == ANALYTIC:
            return dct(y, type=2, norm="ortho", axis=-1)
        return y @ self._matrix

    def inverse(self, coeffs) -> np.ndarray:
        """Design values Phi @ coeffs.  Accepts (..., n) arrays."""
        c = np.asarray(coeffs, dtype=float)
        if c.shape[-1] != self.n:
            raise EbsplinesError(f"expected length {self.n}, got {c.shape[-1]}")
        if self.kind == ANALYTIC:
            return idct(c, type=2, norm="ortho", axis=-1)
        return c @ self._matrix.T


_dct_cache: dict[int, np.ndarray] = {}
_exact_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
_cache_lock = threading.Lock()


def _dct_matrix(n: int) -> np.ndarray:
    with _cache_lock:
        m = _dct_cache.get(n)
    if m is None:
        # synthesis matrix: column k is the orthonormal cosine of frequency k-1
        m = dct(np.eye(n), type=2, norm="ortho", axis=0).T
        with _cache_lock:
            _dct_cache[n] = m
            while len(_dct_cache) > 8:
                _dct_cache.pop(next(iter(_dct_cache)))
    return m


def _exact_decomposition(q: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    with _cache_lock:
        hit = _exact_cache.get((q, n))
    if hit is not None:
        return hit
    # order-q finite differences scaled so the quadratic form approximates
    # the integral of (f^(q))^2; symmetric by construction
    D = np.eye(n)
    for _ in range(q):
        D = np.diff(D, axis=0)
    K = float(n) ** (2 * q - 1) * (D.T @ D)
    K = 0.5 * (K + K.T)
    w, U = np.linalg.eigh(K)
    w[w < 1e-9 * w[-1]] = 0.0
    # deterministic column signs
    j = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[j, np.arange(n)])
    out = (n * w, U)
    with _cache_lock:
        _exact_cache[(q, n)] = out
        while len(_exact_cache) > 8:
            _exact_cache.pop(next(iter(_exact_cache)))
    return out


def make_basis(grid: DesignGrid, q: float, kind: str = ANALYTIC) -> BasisHandle:
    """Construct the orthonormal transform for penalty order q on the grid.

    ``analytic-surrogate`` works for any admissible q; ``exact-eigen`` is
    restricted to q in {1, 2} and n <= 512 (the assembled penalty eigensolve
    is the test oracle, and higher orders are numerically unreliable).
    """
    n = grid.n
    d = int(math.floor(q))
    if kind == ANALYTIC:
        return BasisHandle(kind=ANALYTIC, n=n, q_degree=d)
    if kind == EXACT:
        if q not in (1, 2) or int(q) != q:
            raise UnsupportedBackendError(
                f"exact-eigen backend supports q in {{1, 2}}, got q = {q}")
        if n > _EXACT_MAX_N:
            raise UnsupportedBackendError(
                f"exact-eigen backend supports n <= {_EXACT_MAX_N}, got n = {n}")
        neta, U = _exact_decomposition(int(q), n)
        return BasisHandle(kind=EXACT, n=n, q_degree=d, _matrix=U,
                           exact_eigenvalues=neta)
    raise EbsplinesError(f"unknown basis kind {kind!r}")


def forward(basis: BasisHandle, y) -> np.ndarray:
    """X = Phi^T y (energy preserving)."""
    return basis.forward(y)


def inverse(basis: BasisHandle, coeffs) -> np.ndarray:
    """y = Phi @ coeffs (round trip of forward)."""
    return basis.inverse(coeffs)


def smoother_weights(eigen: EigenSequence, lam: float) -> np.ndarray:
    """Diagonal smoother weights w_i = 1 / (1 + lam * n*eta_i).

    lam = 0 is the interpolation limit (all ones); lam = inf keeps only the
    null space.
    """
    if lam < 0:
        raise EbsplinesError(f"smoothing parameter must be >= 0, got {lam}")
    if lam == 0:
        return np.ones(eigen.n)
    if math.isinf(lam):
        return (eigen.values == 0).astype(float)
    return 1.0 / (1.0 + lam * eigen.values)


@dataclass(frozen=True)
class SpectralModel:
    """Grid + order + eigenvalues + transform, immutable and shareable."""

    grid: DesignGrid
    q: float
    eigen: EigenSequence
    basis: BasisHandle

    def __post_init__(self):
        if self.eigen.n != self.grid.n or self.basis.n != self.grid.n:
            raise EbsplinesError("dimension mismatch between grid, eigenvalues and basis")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def null_dim(self) -> int:
        return self.basis.q_degree


def spectral_model(grid: DesignGrid, q: float, kind: str = ANALYTIC) -> SpectralModel:
    """Assemble a SpectralModel; the exact backend supplies its own eigenvalues."""
    basis = make_basis(grid, q, kind)
    if kind == EXACT:
        eig = EigenSequence(q=float(q), n=grid.n, values=basis.exact_eigenvalues)
    else:
        eig = eigenvalues(q, grid.n)
    return SpectralModel(grid=grid, q=float(q), eigen=eig, basis=basis)
