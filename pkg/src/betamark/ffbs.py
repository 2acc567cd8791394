"""Forward-filtering backward-sampling of the latent Here/Away chains.

Each individual's chain is drawn exactly from its conditional distribution
given the observations and current parameter values: one normalized forward
pass, then reverse-order sampling using the one-step transition
probabilities. A sighting forces the Here state through a structural-zero
emission, never through a small constant.

The single-history functions are the plain reference implementation; the
batch path stacks all individuals into padded arrays and runs a compiled
kernel with one dedicated row of pre-drawn uniforms per individual, so
results are identical no matter how many workers execute it.
"""

from dataclasses import dataclass

import numpy as np

from .model import AWAY, HERE, CountStats, StateChain

try:
    from numba import njit, prange
except ImportError:  # pragma: no cover - numba is a declared dependency
    prange = range

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap if not (args and callable(args[0])) else args[0]


class NumericError(RuntimeError):
    """Forward normalizer underflowed to zero (all-zero joint probability)."""


@dataclass(frozen=True)
class ForwardProbs:
    """Normalized forward probabilities and per-occasion log normalizers.

    ``alpha[t, HERE]`` is P(state t = Here | observations up to t);
    ``log_norm`` accumulates to the conditional log-likelihood of the
    series given the first sighting.
    """

    alpha: np.ndarray
    log_norm: np.ndarray

    @property
    def log_likelihood(self):
        return float(self.log_norm.sum())


def forward_filter(history, params):
    """Run the normalized forward recursion for one individual.

    The series is conditioned on presence at the first sighting, so
    ``alpha[0] = (Here: 1, Away: 0)`` and occasion 0 contributes no
    normalizer.
    """
    x = history.observations
    L = len(x)
    p, gh, ga = params.pi, params.g_hh, params.g_aa
    alpha = np.empty((L, 2))
    log_norm = np.zeros(L)
    alpha[0, HERE] = 1.0
    alpha[0, AWAY] = 0.0
    for t in range(1, L):
        pred_h = alpha[t - 1, HERE] * gh + alpha[t - 1, AWAY] * (1.0 - ga)
        pred_a = alpha[t - 1, HERE] * (1.0 - gh) + alpha[t - 1, AWAY] * ga
        if x[t] == 1:
            w_h = pred_h * p
            w_a = 0.0
        else:
            w_h = pred_h * (1.0 - p)
            w_a = pred_a
        c = w_h + w_a
        if c <= 0.0:
            raise NumericError(
                f"{history.individual_id}: forward normalizer underflowed at index {t}"
            )
        alpha[t, HERE] = w_h / c
        alpha[t, AWAY] = w_a / c
        log_norm[t] = np.log(c)
    return ForwardProbs(alpha=alpha, log_norm=log_norm)


def backward_sample(fp, params, rng):
    """Draw one latent state path given forward probabilities.

    The terminal state comes from the last filtered distribution; earlier
    states are drawn in reverse with weight alpha_t(z) * P(z_{t+1} | z).
    """
    alpha = fp.alpha
    L = alpha.shape[0]
    gh, ga = params.g_hh, params.g_aa
    z = np.empty(L, dtype=np.int8)
    zt = HERE if rng.random() < alpha[L - 1, HERE] else AWAY
    z[L - 1] = zt
    for t in range(L - 2, -1, -1):
        if zt == HERE:
            w_h = alpha[t, HERE] * gh
            w_a = alpha[t, AWAY] * (1.0 - ga)
        else:
            w_h = alpha[t, HERE] * (1.0 - gh)
            w_a = alpha[t, AWAY] * ga
        s = w_h + w_a
        if s <= 0.0:
            raise NumericError(f"degenerate backward weights at index {t}")
        zt = HERE if rng.random() * s < w_h else AWAY
        z[t] = zt
    return StateChain(states=z)


@njit(cache=True, parallel=True)
def _ffbs_kernel(x, lengths, pi, ghh, gaa, u, z, counts, status):
    n, lmax = x.shape
    alpha = np.empty((n, lmax, 2))
    for i in prange(n):
        L = lengths[i]
        p = pi[i]
        gh = ghh[i]
        ga = gaa[i]
        a = alpha[i]
        a[0, 0] = 0.0
        a[0, 1] = 1.0
        ok = True
        for t in range(1, L):
            pred_h = a[t - 1, 1] * gh + a[t - 1, 0] * (1.0 - ga)
            pred_a = a[t - 1, 1] * (1.0 - gh) + a[t - 1, 0] * ga
            if x[i, t] == 1:
                w_h = pred_h * p
                w_a = 0.0
            else:
                w_h = pred_h * (1.0 - p)
                w_a = pred_a
            c = w_h + w_a
            if c <= 0.0:
                status[i] = t
                ok = False
                break
            a[t, 1] = w_h / c
            a[t, 0] = w_a / c
        if not ok:
            continue
        zt = 1 if u[i, 0] < a[L - 1, 1] else 0
        z[i, L - 1] = zt
        k = 1
        for t in range(L - 2, -1, -1):
            if zt == 1:
                w_h = a[t, 1] * gh
                w_a = a[t, 0] * (1.0 - ga)
            else:
                w_h = a[t, 1] * (1.0 - gh)
                w_a = a[t, 0] * ga
            s = w_h + w_a
            zt = 1 if u[i, k] * s < w_h else 0
            z[i, t] = zt
            k += 1
        y_pi = 0
        n_pi = 0
        y_hh = 0
        n_hh = 0
        y_aa = 0
        n_aa = 0
        for t in range(L):
            zt = z[i, t]
            if zt == 1:
                n_pi += 1
                if x[i, t] == 1:
                    y_pi += 1
            if t < L - 1:
                if zt == 1:
                    n_hh += 1
                    if z[i, t + 1] == 1:
                        y_hh += 1
                else:
                    n_aa += 1
                    if z[i, t + 1] == 0:
                        y_aa += 1
        counts[i, 0] = y_pi
        counts[i, 1] = n_pi
        counts[i, 2] = y_hh
        counts[i, 3] = n_hh
        counts[i, 4] = y_aa
        counts[i, 5] = n_aa


def stack_histories(histories):
    """Pad observation series into (x, lengths) arrays for the batch kernel."""
    n = len(histories)
    lengths = np.array([len(h) for h in histories], dtype=np.int64)
    lmax = int(lengths.max()) if n else 0
    x = np.zeros((n, lmax), dtype=np.int8)
    for i, h in enumerate(histories):
        x[i, : lengths[i]] = h.observations
    return x, lengths


def ffbs_batch(x, lengths, pi, ghh, gaa, u, ids=None):
    """Sample all chains and count statistics from stacked arrays.

    ``u[i]`` is individual i's dedicated uniform stream, consumed in
    sampling order (terminal state first). Returns (z, counts) with z
    padded like x and counts columns ordered
    (y_pi, n_pi, y_hh, n_hh, y_aa, n_aa).
    """
    n, lmax = x.shape
    z = np.zeros((n, lmax), dtype=np.int8)
    counts = np.zeros((n, 6), dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    if n:
        _ffbs_kernel(x, lengths, pi, ghh, gaa, u, z, counts, status)
    bad = np.flatnonzero(status)
    if bad.size:
        i = int(bad[0])
        who = ids[i] if ids is not None else f"individual {i}"
        raise NumericError(f"{who}: forward normalizer underflowed at index {status[i]}")
    return z, counts


def sample_all_chains(histories, params, rng):
    """FFBS plus counting for a whole collection of individuals.

    ``rng`` is either a single Generator (a (n, max_length) uniform matrix
    is drawn from it, row i belonging to individual i) or a sequence of
    per-individual Generators. Output order matches input order and is
    independent of any internal parallelism.
    """
    n = len(histories)
    if n == 0:
        return []
    if len(params) != n:
        raise ValueError("need exactly one params entry per history")
    x, lengths = stack_histories(histories)
    lmax = x.shape[1]
    pi = np.array([p.pi for p in params])
    ghh = np.array([p.g_hh for p in params])
    gaa = np.array([p.g_aa for p in params])
    if isinstance(rng, np.random.Generator):
        u = rng.random((n, lmax))
    else:
        if len(rng) != n:
            raise ValueError("need exactly one random stream per history")
        u = np.zeros((n, lmax))
        for i, r in enumerate(rng):
            u[i, : lengths[i]] = r.random(int(lengths[i]))
    ids = [h.individual_id for h in histories]
    z, counts = ffbs_batch(x, lengths, pi, ghh, gaa, u, ids=ids)
    out = []
    for i in range(n):
        chain = StateChain(states=z[i, : lengths[i]])
        out.append((chain, CountStats(*(int(c) for c in counts[i]))))
    return out
