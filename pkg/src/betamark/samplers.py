"""Parameter updates.

Three sampler families live here:

* conjugate Beta-Binomial Gibbs draws for the individual-level
  probabilities;
* an adaptive Independent Metropolis-Hastings step for each Beta
  hyper-parameter block, whose proposal is the Normal-Gamma conjugate
  posterior of the logit-transformed individual values, mapped back to
  (a, b) by matching the exact logit moments;
* a fixed multivariate-t Independent MH step for arbitrary parameter
  blocks with a user-supplied proposal.

All acceptance computations happen in log space.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import specfun
from .model import BetaHyper, clamp_prob

log = logging.getLogger(__name__)

_NEWTON_TOL = 1e-10
_NEWTON_MAX_ITER = 100


class NonConvergenceError(RuntimeError):
    """Logit-moment inversion failed; carries the final residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class HyperUpdate(NamedTuple):
    hyper: BetaHyper
    accepted: bool
    proposal_failed: bool = False


@dataclass(frozen=True)
class NormalGammaPosterior:
    """Conjugate Normal-Gamma posterior for a Gaussian mean and precision."""

    mu_n: float
    kappa_n: float
    alpha_n: float
    beta_n: float


def gibbs_theta(y, n, hyper, rng):
    """Draw from the Beta(y + a, n - y + b) full conditional.

    Accepts scalars or aligned arrays for y and n; n = 0 entries reduce to
    prior draws. Results are clamped strictly inside (0, 1).
    """
    y = np.asarray(y)
    n = np.asarray(n)
    if np.any(y < 0) or np.any(y > n):
        raise ValueError("need 0 <= y <= n")
    draw = rng.beta(y + hyper.a, n - y + hyper.b)
    draw = clamp_prob(draw)
    return float(draw) if draw.ndim == 0 else draw


def beta_to_moments(a, b):
    """Mean and variance of logit(theta) for theta ~ Beta(a, b)."""
    mu = specfun.digamma(a) - specfun.digamma(b)
    sigma2 = specfun.trigamma(a) + specfun.trigamma(b)
    return mu, sigma2


def _logit_moment_start(mu, sigma2):
    # Large-(a, b) asymptotics: mu ~ ln(a/b), sigma2 ~ 1/a + 1/b, inverted.
    a0 = (1.0 + math.exp(mu)) / sigma2
    b0 = (1.0 + math.exp(-mu)) / sigma2
    return math.log(a0), math.log(b0)


def moments_to_beta(mu, sigma2, max_iter=_NEWTON_MAX_ITER, tol=_NEWTON_TOL):
    """Invert the logit-moment map: find (a, b) with the given moments.

    Newton-Raphson on the residual of (digamma difference, trigamma sum),
    iterated in (log a, log b) to preserve positivity, with step halving
    whenever a full step would increase the residual.

    Raises NonConvergenceError if the residual does not fall below ``tol``
    within ``max_iter`` iterations; hyper-parameter proposals treat that as
    a rejection, not a fatal error.
    """
    if not (math.isfinite(mu) and math.isfinite(sigma2) and sigma2 > 0):
        raise NonConvergenceError(f"moments ({mu}, {sigma2}) out of range", math.inf)
    u, v = _logit_moment_start(mu, sigma2)

    def residual(u, v):
        a, b = math.exp(u), math.exp(v)
        f1 = specfun.digamma(a) - specfun.digamma(b) - mu
        f2 = specfun.trigamma(a) + specfun.trigamma(b) - sigma2
        return a, b, f1, f2

    a, b, f1, f2 = residual(u, v)
    norm = max(abs(f1), abs(f2))
    for _ in range(max_iter):
        if norm < tol:
            return a, b
        j11 = specfun.trigamma(a) * a
        j12 = -specfun.trigamma(b) * b
        j21 = specfun.tetragamma(a) * a
        j22 = specfun.tetragamma(b) * b
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            raise NonConvergenceError("singular Jacobian in logit-moment inversion", norm)
        du = -(j22 * f1 - j12 * f2) / det
        dv = -(j11 * f2 - j21 * f1) / det
        # Halve the step until the residual shrinks (or give up on this step).
        for _ in range(50):
            u_new, v_new = u + du, v + dv
            if abs(u_new) < 700.0 and abs(v_new) < 700.0:
                a_new, b_new, f1_new, f2_new = residual(u_new, v_new)
                norm_new = max(abs(f1_new), abs(f2_new))
                if norm_new < norm:
                    break
            du *= 0.5
            dv *= 0.5
        else:
            raise NonConvergenceError("step halving stalled in logit-moment inversion", norm)
        u, v, a, b, f1, f2, norm = u_new, v_new, a_new, b_new, f1_new, f2_new, norm_new
    if norm < tol:
        return a, b
    raise NonConvergenceError("logit-moment inversion did not converge", norm)


def hyper_from_ab(a, b):
    """BetaHyper with logit moments derived from (a, b)."""
    mu, sigma2 = beta_to_moments(a, b)
    return BetaHyper(a=a, b=b, mu=mu, sigma2=sigma2)


def hyper_from_moments(mu, sigma2):
    """BetaHyper with (a, b) solved from the logit moments."""
    a, b = moments_to_beta(mu, sigma2)
    return BetaHyper(a=a, b=b, mu=mu, sigma2=sigma2)


def normal_gamma_update(values, mu0, kappa0, alpha_tau, beta_tau):
    """Conjugate Normal-Gamma update for i.i.d. Gaussian observations."""
    z = np.asarray(values, dtype=float)
    n = z.size
    if n == 0:
        raise ValueError("normal_gamma_update needs at least one value")
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite value in normal_gamma_update input")
    mean = float(z.mean())
    ss = float(((z - mean) ** 2).sum())
    kappa_n = kappa0 + n
    return NormalGammaPosterior(
        mu_n=(kappa0 * mu0 + n * mean) / kappa_n,
        kappa_n=kappa_n,
        alpha_n=alpha_tau + 0.5 * n,
        beta_n=beta_tau + 0.5 * ss + kappa0 * n * (mean - mu0) ** 2 / (2.0 * kappa_n),
    )


def normal_gamma_logpdf(mu, tau, mu0, kappa0, alpha, beta):
    """Log density of (mu, tau) under NormalGamma(mu0, kappa0, alpha, beta).

    tau ~ Gamma(alpha, rate beta) and mu | tau ~ Normal(mu0, 1/(kappa0 tau)).
    """
    if tau <= 0:
        return -math.inf
    lp = alpha * math.log(beta) - specfun.log_gamma(alpha) + (alpha - 1.0) * math.log(tau) - beta * tau
    lp += 0.5 * (math.log(kappa0) + math.log(tau) - math.log(2.0 * math.pi))
    lp -= 0.5 * kappa0 * tau * (mu - mu0) ** 2
    return lp


def beta_loglik(sum_log_t, sum_log_1mt, n, a, b):
    """Sum of log Beta(a, b) densities from sufficient statistics."""
    return (a - 1.0) * sum_log_t + (b - 1.0) * sum_log_1mt - n * specfun.log_beta(a, b)


def imh_hyper_step(thetas, current, mu0, kappa0, alpha_tau, beta_tau, rng):
    """One adaptive Independent MH update of a Beta hyper block.

    The chain lives on the logit moments (mu, sigma2), with (a, b) derived
    deterministically by moment inversion, so the target and proposal are
    densities on the same space and no change-of-variables term appears.
    The proposal is the Normal-Gamma conjugate posterior of the current
    logit-transformed individual values; a candidate whose moment inversion
    fails (or is otherwise non-finite) is rejected rather than fatal.
    """
    theta = clamp_prob(np.asarray(thetas, dtype=float))
    n = theta.size
    z = np.log(theta) - np.log1p(-theta)
    post = normal_gamma_update(z, mu0, kappa0, alpha_tau, beta_tau)

    tau_cand = rng.gamma(post.alpha_n, 1.0 / post.beta_n)
    mu_cand = rng.normal(post.mu_n, 1.0 / math.sqrt(post.kappa_n * tau_cand))
    # The acceptance draw happens now so the stream advances identically
    # whether or not the candidate turns out to be usable.
    log_u = math.log(rng.random())

    try:
        candidate = hyper_from_moments(mu_cand, 1.0 / tau_cand)
    except NonConvergenceError as err:
        log.debug("hyper proposal rejected: %s", err)
        return HyperUpdate(current, accepted=False, proposal_failed=True)

    s1 = float(np.log(theta).sum())
    s0 = float(np.log1p(-theta).sum())

    def log_target(h):
        lp = beta_loglik(s1, s0, n, h.a, h.b)
        lp += normal_gamma_logpdf(h.mu, 1.0 / h.sigma2, mu0, kappa0, alpha_tau, beta_tau)
        return lp

    def log_proposal(h):
        return normal_gamma_logpdf(
            h.mu, 1.0 / h.sigma2, post.mu_n, post.kappa_n, post.alpha_n, post.beta_n
        )

    log_ratio = (log_target(candidate) - log_target(current)) - (
        log_proposal(candidate) - log_proposal(current)
    )
    if not math.isfinite(log_ratio):
        return HyperUpdate(current, accepted=False, proposal_failed=True)
    if log_u < log_ratio:
        return HyperUpdate(candidate, accepted=True)
    return HyperUpdate(current, accepted=False)


@dataclass(frozen=True)
class MvtProposal:
    """Multivariate Student-t proposal: location, scale matrix, dof."""

    mean: np.ndarray
    scale: np.ndarray
    df: float
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)
        if self.df <= 2:
            raise ValueError("df must exceed 2")
        if scale.shape != (mean.size, mean.size):
            raise ValueError("scale matrix shape does not match mean vector")
        try:
            chol = np.linalg.cholesky(scale)
        except np.linalg.LinAlgError as err:
            raise ValueError(f"scale matrix is not positive definite: {err}") from err
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self):
        return self.mean.size

    @classmethod
    def from_file(cls, path):
        """Load a proposal from a JSON file with keys mean, scale, df."""
        with open(path) as fh:
            doc = json.load(fh)
        return cls(mean=np.asarray(doc["mean"], dtype=float),
                   scale=np.asarray(doc["scale"], dtype=float),
                   df=float(doc["df"]))

    def to_file(self, path):
        doc = {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "df": self.df}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def mvt_sample(proposal, rng):
    """Draw from the multivariate t: mean + L z sqrt(df / chisq(df))."""
    z = rng.standard_normal(proposal.dim)
    g = rng.chisquare(proposal.df)
    return proposal.mean + (proposal._chol @ z) * math.sqrt(proposal.df / g)


def mvt_logpdf(proposal, x):
    """Exact multivariate Student-t log density at x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = proposal.dim
    nu = proposal.df
    diff = x - proposal.mean
    w = np.linalg.solve(proposal._chol, diff)
    maha = float(w @ w)
    logdet = 2.0 * float(np.log(np.diag(proposal._chol)).sum())
    return (
        specfun.log_gamma(0.5 * (nu + d))
        - specfun.log_gamma(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * logdet
        - 0.5 * (nu + d) * math.log1p(maha / nu)
    )


def imh_fixed_step(current, log_target, proposal, rng):
    """One Independent MH update with an unchanging multivariate-t proposal.

    Returns (state, accepted). Candidates with non-finite target log
    density are rejected.
    """
    candidate = mvt_sample(proposal, rng)
    log_u = math.log(rng.random())
    lt_cand = log_target(candidate)
    if not math.isfinite(lt_cand):
        return np.array(current, dtype=float), False
    log_ratio = (lt_cand - log_target(current)) - (
        mvt_logpdf(proposal, candidate) - mvt_logpdf(proposal, current)
    )
    if log_u < log_ratio:
        return candidate, True
    return np.array(current, dtype=float), False
