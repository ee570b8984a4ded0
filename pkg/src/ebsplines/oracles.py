"""Closed-form constants and expectation-level (oracle) quantities.

The trace of smoother powers obeys

    tr{(I-S)^m S^l} = sum_i (u_i)^m / (1+u_i)^(m+l)
                    = lam^(-1/(2q)) kappa_q(m, l) {1+o(1)},
    kappa_q(m, l)   = Gamma(m + 1/(2q)) Gamma(l - 1/(2q)) / (2 pi q Gamma(l+m)),

with u_i = lam * n*eta_{q,i}.  These constants drive the oracle smoothing
parameter, the expected estimating equations and the asymptotic variances of
the empirical-Bayes and GCV selectors.  ``polished_tail_check`` verifies the
tail-regularity condition under which order selection is consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import EbsplinesError
from .spectral import eigenvalues


def kappa(q: float, m: int, l: int) -> float:
    """Trace constant kappa_q(m, l); log-Gamma evaluation avoids overflow."""
    if not q > 0.5:
        raise EbsplinesError(f"need q > 1/2, got {q}")
    if l < 1:
        raise EbsplinesError(f"need l >= 1, got l = {l}")
    if m < 0:
        raise EbsplinesError(f"need m >= 0, got m = {m}")
    h = 1.0 / (2.0 * q)
    lg = gammaln(m + h) + gammaln(l - h) - gammaln(l + m)
    return float(math.exp(lg) / (2.0 * math.pi * q))


@dataclass(frozen=True)
class KappaTable:
    """kappa_q(m, l) over a rectangle of (m, l) pairs."""

    q: float
    entries: dict

    def __getitem__(self, ml: tuple[int, int]) -> float:
        return self.entries[ml]


def kappa_table(q: float, max_m: int = 4, max_l: int = 4) -> KappaTable:
    entries = {(m, l): kappa(q, m, l)
               for m in range(max_m + 1) for l in range(1, max_l + 1)}
    return KappaTable(q=float(q), entries=entries)


@dataclass(frozen=True)
class TraceCheck:
    exact_sum: float
    approx: float
    rel_err: float


def trace_approx_check(q: float, lam: float, n: int, m: int, l: int,
                       r: int = 0) -> TraceCheck:
    """Direct trace sum against its lam^(-1/(2q)) kappa_q(m,l) approximation.

    ``r`` adds the log-power variant: each summand gains log(n*eta)^r (summed
    beyond the null space only) and the approximation gains log(1/lam)^r.
    """
    if not (0 < lam <= 1):
        raise EbsplinesError(f"need 0 < lambda <= 1, got {lam}")
    eig = eigenvalues(q, n)
    u = lam * eig.values
    if r == 0:
        term = u ** m / (1.0 + u) ** (m + l)  # 0^0 = 1 covers the null space
        exact = float(np.sum(term))
    elif r > 0:
        ut = lam * eig.tail
        term = ut ** m * np.log(eig.tail) ** r / (1.0 + ut) ** (m + l)
        exact = float(np.sum(term))
    else:
        raise EbsplinesError(f"need r >= 0, got {r}")
    approx = lam ** (-1.0 / (2.0 * q)) * kappa(q, m, l)
    if r > 0:
        approx *= math.log(1.0 / lam) ** r
    return TraceCheck(exact_sum=exact, approx=approx,
                      rel_err=(exact - approx) / approx)


@dataclass(frozen=True)
class SignalSpectrum:
    """Noiseless spectral coefficients B = Phi^T f of a regression function.

    When both a nominal smoothness and a radius bound are given, the implied
    derivative energy is checked against the squared radius at construction.
    """

    B: np.ndarray
    beta_nominal: float | None = None
    sobolev_radius: float | None = None

    def __post_init__(self):
        if self.beta_nominal is not None and self.sobolev_radius is not None:
            energy = self.derivative_energy(self.beta_nominal)
            if not energy < self.sobolev_radius ** 2:
                raise EbsplinesError(
                    f"derivative energy {energy:.4g} at order "
                    f"{self.beta_nominal} exceeds the radius bound "
                    f"{self.sobolev_radius ** 2:.4g}")

    @property
    def n(self) -> int:
        return len(self.B)

    def derivative_energy(self, q: float) -> float:
        """(1/n) sum B_i^2 n*eta_{q,i} -- the computable surrogate for the
        squared q-th derivative norm."""
        eig = eigenvalues(q, self.n)
        return float(np.dot(self.B ** 2, eig.values)) / self.n


def _e_tails(spectrum: SignalSpectrum, q: float) -> tuple[np.ndarray, np.ndarray]:
    eig = eigenvalues(q, spectrum.n)
    d = eig.null_dim
    return np.asarray(spectrum.B, dtype=float)[d:] ** 2, eig.tail


def expected_t_lambda(spectrum: SignalSpectrum, sigma2: float, lam: float,
                      q: float) -> float:
    """Expected estimating equation for lambda under the regression model:
    (1/n) { sum B^2 u/(1+u)^2 - sigma^2 sum 1/(1+u)^2 } beyond the null space."""
    if not lam > 0:
        raise EbsplinesError(f"need lambda > 0, got {lam}")
    b2, nz = _e_tails(spectrum, q)
    u = lam * nz
    sig = float(np.dot(b2, u / (1.0 + u) ** 2))
    noi = sigma2 * float(np.sum(1.0 / (1.0 + u) ** 2))
    return (sig - noi) / spectrum.n


def expected_t_q(spectrum: SignalSpectrum, sigma2: float, lam: float,
                 q: float) -> float:
    """Expected estimating equation for q:
    (1/n) sum B^2 u log(u)/(1+u)^2 + log(1/lam) * E T_lam.

    At the oracle root of E T_lam this reduces to the pure quadratic-form
    term, whose sign flags whether the signal is rougher than order q.
    """
    if not lam > 0:
        raise EbsplinesError(f"need lambda > 0, got {lam}")
    b2, nz = _e_tails(spectrum, q)
    u = lam * nz
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(u > 0, u * np.log(u), 0.0) / (1.0 + u) ** 2
    term = float(np.dot(b2, quad)) / spectrum.n
    return term + math.log(1.0 / lam) * expected_t_lambda(spectrum, sigma2, lam, q)


@dataclass(frozen=True)
class OracleResult:
    lambda_q: float
    method: str
    derivative_energy: float


def oracle_lambda(spectrum: SignalSpectrum, sigma2: float, q: float,
                  method: str = "closed-form",
                  lam_range: tuple[float, float] = (1e-28, 1.0)) -> OracleResult:
    """Oracle smoothing parameter for a fixed order.

    closed-form: [ n ||f^(q)||^2 / (sigma^2 kappa_q(0,2)) ]^(-2q/(2q+1)),
    with the derivative energy estimated from the spectrum; a vanishing
    energy (signal inside the null space) yields the infinity sentinel.
    numeric-root: bisection on E T_lam = 0.
    """
    energy = spectrum.derivative_energy(q)
    if method == "closed-form":
        total = float(np.sum(np.asarray(spectrum.B) ** 2))
        if energy <= 0 or (total > 0 and energy < 1e-26 * total):
            return OracleResult(lambda_q=math.inf, method=method,
                                derivative_energy=energy)
        lam = (spectrum.n * energy / (sigma2 * kappa(q, 0, 2))) ** (-2.0 * q / (2.0 * q + 1.0))
        return OracleResult(lambda_q=lam, method=method, derivative_energy=energy)
    if method == "numeric-root":
        lo, hi = lam_range
        flo = expected_t_lambda(spectrum, sigma2, lo, q)
        fhi = expected_t_lambda(spectrum, sigma2, hi, q)
        if flo >= 0 or math.copysign(1.0, flo) == math.copysign(1.0, fhi):
            return OracleResult(lambda_q=math.inf, method=method,
                                derivative_energy=energy)
        a, b = lo, hi
        fa = flo
        for _ in range(300):
            mid = math.sqrt(a * b)
            fm = expected_t_lambda(spectrum, sigma2, mid, q)
            if fa * fm <= 0:
                b = mid
            else:
                a, fa = mid, fm
            if b / a < 1.0 + 1e-12:
                break
        return OracleResult(lambda_q=math.sqrt(a * b), method=method,
                            derivative_energy=energy)
    raise EbsplinesError(f"unknown oracle method {method!r}")


@dataclass(frozen=True)
class PolishedTailResult:
    holds: bool
    worst_j: int
    worst_ratio: float


def polished_tail_check(B, L: float = 2.0, N: int = 10,
                        rho: float = 2.0) -> PolishedTailResult:
    """Check the polished-tail condition on spectral coefficients:

        (1/n) sum_{i=j..n} B_i^2 <= (L/n) sum_{i=j..rho*j} B_i^2
                                    for all N <= j <= n/rho.

    Indices are 1-based as in the defining inequality.  Returns the worst
    ratio of tail mass to block mass and where it occurs; scale-invariant in B.
    """
    if rho < 2:
        raise EbsplinesError(f"need rho >= 2, got {rho}")
    b2 = np.asarray(B, dtype=float) ** 2
    n = len(b2)
    jmax = int(math.floor(n / rho))
    if N > jmax:
        raise EbsplinesError(f"need N <= n/rho = {jmax}, got N = {N}")
    # suffix sums accumulate from the small end, so block masses deep in the
    # tail stay representable (a forward cumsum would lose them to rounding)
    suffix = np.concatenate([np.cumsum(b2[::-1])[::-1], [0.0]])
    worst_j, worst_ratio = N, 0.0
    holds = True
    for j in range(N, jmax + 1):
        tail = suffix[j - 1]
        hi = min(int(math.floor(rho * j)), n)
        block = suffix[j - 1] - suffix[hi]
        if tail == 0.0:
            ratio = 0.0
        elif block == 0.0:
            ratio = math.inf
        else:
            ratio = tail / block
        if ratio > worst_ratio:
            worst_ratio, worst_j = ratio, j
        if ratio > L:
            holds = False
    return PolishedTailResult(holds=holds, worst_j=worst_j, worst_ratio=worst_ratio)


@dataclass(frozen=True)
class SelectorVariances:
    eb: float
    gcv: float
    ratio: float


def asymptotic_variances(q: float) -> SelectorVariances:
    """Scaled asymptotic variances of lambda_hat/lambda - 1 for the
    empirical-Bayes and GCV selectors, and their ratio gcv/eb."""
    eb = 2.0 * kappa(q, 2, 2) / (3.0 * kappa(q, 0, 2) - 2.0 * kappa(q, 0, 3)) ** 2
    gcv = 2.0 * kappa(q, 4, 2) / (4.0 * kappa(q, 1, 2) - 3.0 * kappa(q, 1, 3)) ** 2
    return SelectorVariances(eb=eb, gcv=gcv, ratio=gcv / eb)
