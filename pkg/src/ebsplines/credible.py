"""Credible balls around the adaptive fit and their frequentist coverage.

Under the marginal posterior, the squared distance of the regression function
from the fitted values, scaled by the noise estimate, is distributed like

    (1/N) sum_i eps_i^2 / (1 + lam * n*eta_i),   eps ~ N(0, I_n),  N ~ chi^2_n,

in the rms norm.  ``radius`` estimates the (1-alpha) quantile r_n(lam, q) of
that law by seeded Monte Carlo; the empirical credible ball has center at the
fit and radius sigma_hat * L * r_n(lambda_hat, q_hat).  ``sample_posterior``
draws whole curves from the fitted posterior (a multivariate t realized as a
Gaussian scale mixture in the spectral domain), and ``coverage_experiment``
measures how often the ball captures the true function.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import EbsplinesError
from .selection import FitResult, ModelFamily, fit
from .spectral import ANALYTIC, SpectralModel, design_grid, rms_norm, smoother_weights


@dataclass(frozen=True)
class RadiusSpec:
    """Monte Carlo settings for the posterior-quantile radius."""

    alpha: float = 0.05
    mc_draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise EbsplinesError(f"need 0 < alpha < 1, got {self.alpha}")
        if self.mc_draws < 1000:
            raise EbsplinesError("need at least 1000 draws for a stable quantile")


class _RadiusSampler:
    """Shared bank of squared-Gaussian draws; radius(lam) is then a matvec.

    Using common random numbers across lambda values makes the radius a
    deterministic, monotone function of lambda for a fixed spec.
    """

    def __init__(self, n: int, draws: int, seed: int):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((draws, n))
        self.e2 = z * z
        self.chi2 = rng.chisquare(n, size=draws)
        self.n = n

    def quantile(self, weights: np.ndarray, alpha: float) -> float:
        stats = (self.e2 @ weights) / self.chi2
        return float(np.quantile(stats, 1.0 - alpha))


_samplers: dict[tuple[int, int, int], _RadiusSampler] = {}
_sampler_lock = threading.Lock()


def _sampler(n: int, draws: int, seed: int) -> _RadiusSampler:
    key = (n, draws, seed)
    with _sampler_lock:
        s = _samplers.get(key)
    if s is None:
        s = _RadiusSampler(n, draws, seed)
        with _sampler_lock:
            _samplers[key] = s
            while len(_samplers) > 2:
                _samplers.pop(next(iter(_samplers)))
    return s


def radius(model: SpectralModel, lam: float, spec: RadiusSpec) -> float:
    """r_n(lam, q): square root of the (1-alpha) Monte Carlo quantile of the
    posterior distance law.  Deterministic given (n, lam, q, spec)."""
    if lam < 0:
        raise EbsplinesError(f"need lambda >= 0, got {lam}")
    w = smoother_weights(model.eigen, lam)
    s = _sampler(model.n, spec.mc_draws, spec.seed)
    return math.sqrt(s.quantile(w, spec.alpha))


@dataclass(frozen=True)
class CredibleBall:
    """l2 ball (rms norm) around the adaptive fit."""

    center: np.ndarray
    radius: float
    L: float
    alpha: float
    lambda_hat: float
    q_hat: float

    def contains(self, f) -> bool:
        return rms_norm(np.asarray(f, dtype=float) - self.center) <= self.radius

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "radius": self.radius,
            "L": self.L,
            "alpha": self.alpha,
            "lambda_hat": self.lambda_hat,
            "q_hat": self.q_hat,
            "n": int(len(self.center)),
        }


def credible_ball(result: FitResult, L: float = 2.0,
                  spec: RadiusSpec = RadiusSpec()) -> CredibleBall:
    """Empirical credible ball with radius sigma_hat * L * r_n(lambda_hat, q_hat).

    L >= 1; the default L = 2 dominates 1 + sqrt((2q-1)/(2q)) uniformly in q.
    """
    if L < 1:
        raise EbsplinesError(f"need L >= 1, got {L}")
    r = radius(result.model, result.lambda_hat, spec)
    return CredibleBall(center=result.fitted,
                        radius=math.sqrt(result.sigma2_hat) * L * r,
                        L=L, alpha=spec.alpha,
                        lambda_hat=result.lambda_hat, q_hat=result.q_hat)


def sample_posterior(result: FitResult, draws: int, seed: int = 0) -> np.ndarray:
    """Draws from the fitted marginal posterior of the function values.

    The multivariate t with scale sigma2_hat * S is realized in the spectral
    domain as a Gaussian with diagonal covariance sigma2_hat * w divided by
    sqrt(chi^2_n / n), then transformed back.  Returns (draws, n).
    """
    if draws < 1:
        raise EbsplinesError(f"need draws >= 1, got {draws}")
    model = result.model
    n = model.n
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((draws, n))
    u = rng.chisquare(n, size=draws) / n
    scale = math.sqrt(max(result.sigma2_hat, 0.0)) * np.sqrt(
        smoother_weights(model.eigen, result.lambda_hat))
    curves = model.basis.inverse(z * scale) / np.sqrt(u)[:, None]
    return result.fitted + curves


@dataclass(frozen=True)
class CoverageReport:
    generator: str
    n: int
    replicates: int
    L: float
    alpha: float
    sigma: float
    coverage: float
    radius_quantiles: dict
    q_hat_counts: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "generator": self.generator,
            "n": self.n,
            "replicates": self.replicates,
            "L": self.L,
            "alpha": self.alpha,
            "sigma": self.sigma,
            "coverage": self.coverage,
            "radius_quantiles": self.radius_quantiles,
            "q_hat_counts": self.q_hat_counts,
            "seed": self.seed,
        }


def coverage_experiment(generator, n: int, replicates: int, L: float = 2.0,
                        spec: RadiusSpec = RadiusSpec(), sigma: float = 0.01,
                        qgrid=None, convention: str = "midpoint",
                        kind: str = ANALYTIC, seed: int = 0) -> CoverageReport:
    """Empirical coverage of the adaptive credible ball over replicates.

    ``generator`` is either a vector of true function values of length n or an
    object with a ``values(grid)`` method.  Each replicate draws fresh noise
    from its own seeded substream (order-invariant), fits, builds the ball and
    records membership of the truth plus the realized radius.
    """
    if replicates < 1:
        raise EbsplinesError("need at least one replicate")
    grid = design_grid(n, convention)
    if hasattr(generator, "values"):
        f_true = np.asarray(generator.values(grid), dtype=float)
        gen_name = getattr(generator, "kind", type(generator).__name__)
    else:
        f_true = np.asarray(generator, dtype=float)
        gen_name = "custom-values"
    if len(f_true) != n:
        raise EbsplinesError("true function length does not match n")

    family = ModelFamily(grid, kind=kind)
    streams = np.random.SeedSequence(seed).spawn(replicates)
    hits = 0
    radii = []
    q_counts: dict[float, int] = {}
    for k in range(replicates):
        rng = np.random.default_rng(streams[k])
        y = f_true + sigma * rng.standard_normal(n)
        res = fit(family, y, qgrid=qgrid)
        ball = credible_ball(res, L=L, spec=spec)
        hits += ball.contains(f_true)
        radii.append(ball.radius)
        q_counts[res.q_hat] = q_counts.get(res.q_hat, 0) + 1

    radii = np.asarray(radii)
    quants = {str(p): float(np.quantile(radii, p)) for p in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return CoverageReport(generator=str(gen_name), n=n, replicates=replicates,
                          L=L, alpha=spec.alpha, sigma=sigma,
                          coverage=hits / replicates,
                          radius_quantiles=quants,
                          q_hat_counts={str(k): v for k, v in sorted(q_counts.items())},
                          seed=seed)
