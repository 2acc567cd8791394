"""Core data model: capture histories, latent chains, count statistics,
hyper-parameter blocks and run configuration."""

from dataclasses import dataclass, field

import numpy as np

from . import specfun

# Latent state codes. A sighting is possible only in the HERE state.
HERE = 1
AWAY = 0

# Parameter blocks, in fixed update order: detection, stay-Here, stay-Away.
BLOCKS = ("pi", "gHH", "gAA")

# Probabilities are clamped this far inside (0, 1) before logit transforms.
PROB_EPS = 1e-12

# Tolerance for the digamma/trigamma consistency between the (a, b) and
# logit-moment representations of a hyper block.
_MOMENT_TOL = 1e-8


class ValidationError(ValueError):
    """A capture history or configuration violates a structural invariant."""


class InconsistentChainError(ValueError):
    """A state chain contradicts its capture history (seen while Away)."""


def clamp_prob(p):
    """Clamp a probability (scalar or array) into [PROB_EPS, 1 - PROB_EPS]."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(frozen=True, eq=False)
class CaptureHistory:
    """Binary seen/not-seen series for one animal, starting at first sighting.

    ``first_occasion`` is the absolute index of the first sighting;
    ``observations[0]`` is always 1 by construction.
    """

    individual_id: str
    first_occasion: int
    observations: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.int8)
        object.__setattr__(self, "observations", obs)

    def __len__(self):
        return len(self.observations)

    def __eq__(self, other):
        if not isinstance(other, CaptureHistory):
            return NotImplemented
        return (
            self.individual_id == other.individual_id
            and self.first_occasion == other.first_occasion
            and np.array_equal(self.observations, other.observations)
        )


@dataclass(frozen=True, eq=False)
class StateChain:
    """Sampled latent Here/Away path aligned with one capture history."""

    states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=np.int8))

    def __len__(self):
        return len(self.states)

    def __eq__(self, other):
        if not isinstance(other, StateChain):
            return NotImplemented
        return np.array_equal(self.states, other.states)


@dataclass(frozen=True)
class CountStats:
    """Per-individual success/trial tallies for the three parameter blocks."""

    obs_successes: int
    obs_trials: int
    hh_successes: int
    hh_trials: int
    aa_successes: int
    aa_trials: int

    def __post_init__(self):
        for succ, tot in (
            (self.obs_successes, self.obs_trials),
            (self.hh_successes, self.hh_trials),
            (self.aa_successes, self.aa_trials),
        ):
            if succ < 0 or tot < 0 or succ > tot:
                raise ValidationError(f"invalid counts: {succ} successes of {tot} trials")

    def block(self, name):
        """(successes, trials) pair for one of the blocks in BLOCKS."""
        return {
            "pi": (self.obs_successes, self.obs_trials),
            "gHH": (self.hh_successes, self.hh_trials),
            "gAA": (self.aa_successes, self.aa_trials),
        }[name]


@dataclass(frozen=True)
class BetaHyper:
    """Population-level Beta(a, b) block together with its logit moments.

    ``mu`` and ``sigma2`` are the mean and variance of logit(theta) for
    theta ~ Beta(a, b); both representations are kept in sync so the chain
    can live on (mu, sigma2) while the likelihood is evaluated in (a, b).
    """

    a: float
    b: float
    mu: float
    sigma2: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.sigma2 > 0):
            raise ValidationError(
                f"BetaHyper requires a, b, sigma2 > 0, got {self.a}, {self.b}, {self.sigma2}"
            )
        mu = specfun.digamma(self.a) - specfun.digamma(self.b)
        s2 = specfun.trigamma(self.a) + specfun.trigamma(self.b)
        if abs(mu - self.mu) > _MOMENT_TOL or abs(s2 - self.sigma2) > _MOMENT_TOL:
            raise ValidationError(
                "BetaHyper (a, b) and (mu, sigma2) representations disagree: "
                f"psi moments ({mu}, {s2}) vs stored ({self.mu}, {self.sigma2})"
            )


@dataclass(frozen=True)
class IndividualParams:
    """Detection and state-persistence probabilities for one animal."""

    pi: float
    g_hh: float
    g_aa: float

    def __post_init__(self):
        for name, value in (("pi", self.pi), ("g_hh", self.g_hh), ("g_aa", self.g_aa)):
            if not 0.0 < value < 1.0:
                raise ValidationError(f"{name} must lie strictly in (0, 1), got {value}")
            object.__setattr__(self, name, float(clamp_prob(value)))


@dataclass(frozen=True)
class TruthRecord:
    """True per-individual parameters and the Beta blocks that generated them."""

    ids: tuple
    pi: np.ndarray
    g_hh: np.ndarray
    g_aa: np.ndarray
    blocks: dict | None = None

    def block_values(self, name):
        return {"pi": self.pi, "gHH": self.g_hh, "gAA": self.g_aa}[name]


@dataclass
class ChainState:
    """Full mutable MCMC state for one run."""

    pi: np.ndarray
    g_hh: np.ndarray
    g_aa: np.ndarray
    hypers: dict
    iteration: int = 0
    accepted: dict = field(default_factory=lambda: {b: 0 for b in BLOCKS})
    attempted: dict = field(default_factory=lambda: {b: 0 for b in BLOCKS})
    proposal_failures: dict = field(default_factory=lambda: {b: 0 for b in BLOCKS})
    seed: int = 0

    def block_values(self, name):
        return {"pi": self.pi, "gHH": self.g_hh, "gAA": self.g_aa}[name]

    def acceptance_rate(self, name):
        att = self.attempted[name]
        return self.accepted[name] / att if att else 0.0


@dataclass
class RunConfig:
    """MCMC run settings and Normal-Gamma hyper-prior constants."""

    iterations: int = 15000
    burnin: int = 5000
    thin: int = 1
    theta_thin: int = 10
    mu0: float = 0.0
    kappa0: float = 0.1
    alpha_tau: float = 0.1
    beta_tau: float = 0.1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 0 or self.burnin < 0:
            raise ValidationError("iterations and burnin must be non-negative")
        if self.burnin > self.iterations:
            raise ValidationError("burnin must not exceed iterations")
        if self.thin < 1 or self.theta_thin < 1:
            raise ValidationError("thinning strides must be >= 1")
        if not (self.kappa0 > 0 and self.alpha_tau > 0 and self.beta_tau > 0):
            raise ValidationError("prior constants kappa0, alpha_tau, beta_tau must be > 0")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")


def validate_history(history, horizon):
    """Check all CaptureHistory invariants against the global horizon.

    Raises ValidationError naming the index and nature of the first
    violation.
    """
    hid = history.individual_id
    obs = history.observations
    if history.first_occasion < 0:
        raise ValidationError(f"{hid}: first occasion {history.first_occasion} is negative")
    if len(obs) == 0:
        raise ValidationError(f"{hid}: empty observation series")
    bad = np.flatnonzero((obs != 0) & (obs != 1))
    if bad.size:
        raise ValidationError(f"{hid}: non-binary entry at index {bad[0]}")
    if obs[0] != 1:
        raise ValidationError(f"{hid}: first observation must be 1")
    if history.first_occasion + len(obs) > horizon:
        raise ValidationError(
            f"{hid}: series of length {len(obs)} starting at occasion "
            f"{history.first_occasion} overruns horizon {horizon}"
        )


def count_stats(chain, history):
    """Success/trial tallies from one sampled chain and its history.

    Detection: a trial at every Here occasion, a success when also seen.
    Stay-Here: a trial at every non-final Here occasion, a success when the
    next state is Here again; stay-Away symmetrically.
    """
    z = chain.states
    x = history.observations
    if len(z) != len(x):
        raise InconsistentChainError(
            f"{history.individual_id}: chain length {len(z)} != history length {len(x)}"
        )
    bad = np.flatnonzero((x == 1) & (z == AWAY))
    if bad.size:
        raise InconsistentChainError(
            f"{history.individual_id}: seen while Away at index {bad[0]}"
        )
    here = z == HERE
    obs_trials = int(here.sum())
    obs_successes = int((here & (x == 1)).sum())
    prev, nxt = z[:-1], z[1:]
    hh_trials = int((prev == HERE).sum())
    hh_successes = int(((prev == HERE) & (nxt == HERE)).sum())
    aa_trials = int((prev == AWAY).sum())
    aa_successes = int(((prev == AWAY) & (nxt == AWAY)).sum())
    return CountStats(obs_successes, obs_trials, hh_successes, hh_trials,
                      aa_successes, aa_trials)
