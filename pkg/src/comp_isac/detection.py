"""GLRT target detection: statistic, threshold, closed forms, Monte Carlo.

The receiving base station observes N samples that are either pure noise
(H0) or the superposition of all L transmitted symbol streams scaled by
the two-round channel coefficients plus noise (H1). The GLRT statistic
projects the observation onto the column space of the symbol matrix:

    T(y) = y^H X (X^H X)^{-1} X^H y / sigma^2.

Under H0, 2T is chi-squared with 2L degrees of freedom, which fixes the
threshold for a target false-alarm probability through the regularized
upper incomplete gamma function. Under H1, 2T is noncentral chi-squared,
giving the Marcum-Q detection probability, either with the realized Gram
matrix (exact) or with its large-N diagonal limit (closed form in the
per-BS powers).
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import db_to_linear
from .errors import DomainError, RankDeficiencyError
from .specfun import inv_upper_gamma_regularized, marcum_q, upper_gamma_regularized

__all__ = [
    "SymbolBlock",
    "DetectionSetup",
    "HypothesisSample",
    "generate_symbols",
    "glrt_statistic",
    "glrt_statistic_batch",
    "detection_threshold",
    "pod_exact",
    "pod_closed_form",
    "sample_h0_statistics",
    "simulate_detection",
    "DetectionSimResult",
    "pfa_closed_form",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass
class SymbolBlock:
    """N x L matrix of transmitted symbols, column l scaled by sqrt(P_l)."""

    X: np.ndarray
    modulation: str
    power: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=complex)
        self.power = np.atleast_1d(np.asarray(self.power, dtype=float))
        if self.X.ndim != 2:
            raise DomainError("symbol block must be a 2-D matrix")
        n, l = self.X.shape
        if n < l:
            raise DomainError(f"need N >= L for a well-defined projection, got N={n}, L={l}")
        if self.power.shape != (l,):
            raise DomainError(f"power vector must have length {l}")
        if self.modulation == "qpsk":
            # constant modulus: every column's average power equals P_l exactly
            col_power = np.mean(np.abs(self.X) ** 2, axis=0)
            if np.any(np.abs(col_power - self.power) > 1e-9 * np.maximum(1.0, self.power)):
                raise DomainError("qpsk column power does not match the power vector")

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def L(self):
        return self.X.shape[1]


@dataclass
class DetectionSetup:
    """Threshold and dimensions for one binary detection problem."""

    L: int
    N: int
    delta: float
    sigma_s2: float

    def __post_init__(self):
        if self.L < 1 or self.N < self.L:
            raise DomainError(f"need N >= L >= 1, got L={self.L}, N={self.N}")
        self.delta = float(self.delta)
        if self.delta < 0:
            raise DomainError(f"delta must be >= 0, got {self.delta}")
        self.sigma_s2 = float(self.sigma_s2)
        if self.sigma_s2 <= 0:
            raise DomainError("sigma_s2 must be positive")

    @classmethod
    def from_scenario(cls, config, target=0):
        """Setup for one target's receiving BS, threshold from the PFA goal."""
        return cls(
            L=config.L,
            N=config.N,
            delta=detection_threshold(config.L, config.pfa_target),
            sigma_s2=db_to_linear(config.noise_sense_db[target]),
        )


@dataclass
class HypothesisSample:
    """One labeled observation vector for the binary test."""

    y: np.ndarray
    truth: str

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=complex)
        if self.y.ndim != 1:
            raise DomainError("observation must be a length-N vector")
        if self.truth not in ("H0", "H1"):
            raise DomainError(f"truth must be 'H0' or 'H1', got {self.truth!r}")


def generate_symbols(P, N, modulation="qpsk", stream=None):
    """Draw one SymbolBlock with per-column powers P.

    QPSK entries are uniform over {+-1 +- j}/sqrt(2) scaled by sqrt(P_l),
    so every symbol carries power P_l exactly. Gaussian entries are
    circularly symmetric with unit variance before scaling.
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    if np.any(P < 0):
        raise DomainError("powers must be nonnegative")
    L = P.shape[0]
    if N < L:
        raise DomainError(f"need N >= L, got N={N}, L={L}")
    if stream is None:
        stream = np.random.default_rng()
    if modulation == "qpsk":
        re = stream.integers(0, 2, size=(N, L)) * 2 - 1
        im = stream.integers(0, 2, size=(N, L)) * 2 - 1
        x = (re + 1j * im) * _INV_SQRT2
    elif modulation == "gaussian":
        x = (stream.standard_normal((N, L)) + 1j * stream.standard_normal((N, L))) * _INV_SQRT2
    else:
        raise DomainError(f"modulation must be 'qpsk' or 'gaussian', got {modulation!r}")
    return SymbolBlock(X=x * np.sqrt(P), modulation=modulation, power=P)


def _block_matrix(X):
    return X.X if isinstance(X, SymbolBlock) else np.asarray(X, dtype=complex)


def glrt_statistic(y, X, sigma_s2):
    """Projection quadratic form y^H X (X^H X)^{-1} X^H y / sigma_s2.

    Computed through a reduced QR factorization of X, never forming the
    explicit inverse: with X = QR the statistic is ||Q^H y||^2 / sigma_s2.
    Raises RankDeficiencyError when the smallest singular value of X
    falls below N * eps * (largest singular value).
    """
    mat = _block_matrix(X)
    y = np.asarray(y, dtype=complex)
    n, l = mat.shape
    if y.shape != (n,):
        raise DomainError(f"observation length {y.shape} does not match N={n}")
    sigma_s2 = float(sigma_s2)
    if sigma_s2 <= 0:
        raise DomainError("sigma_s2 must be positive")
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals[-1] < n * np.finfo(float).eps * svals[0]:
        raise RankDeficiencyError(
            f"symbol matrix is numerically rank deficient (sigma_min={svals[-1]:.3e})"
        )
    q, _ = np.linalg.qr(mat)
    proj = q.conj().T @ y
    return float(np.real(np.vdot(proj, proj)) / sigma_s2)


def glrt_statistic_batch(Y, X_stack, sigma_s2):
    """Vectorized GLRT statistics for a stack of trials.

    ``Y`` has shape (B, N) and ``X_stack`` shape (B, N, L); returns a
    length-B array. No per-block rank check is performed: random QPSK or
    Gaussian blocks with N >= L are full rank almost surely, and the
    Monte Carlo drivers that call this path own that guarantee.
    """
    q, _ = np.linalg.qr(X_stack)
    proj = np.einsum("bnl,bn->bl", q.conj(), Y)
    return np.sum(np.abs(proj) ** 2, axis=1) / float(sigma_s2)


def detection_threshold(L, pfa_target):
    """GLRT threshold delta meeting a false-alarm target.

    Under H0 twice the statistic is chi-squared with 2L degrees of
    freedom, so PFA(delta) is the regularized upper incomplete gamma
    function at delta and the threshold is its inverse.
    """
    return inv_upper_gamma_regularized(L, pfa_target)


def pod_exact(h_s, X, sigma_s2, delta):
    """Detection probability with the realized Gram matrix (no large-N limit).

    Conditions on the transmitted block X: the noncentrality is
    2 h_s^H (X^H X) h_s / sigma_s2 and the result is the Marcum-Q tail
    of order L at the threshold.
    """
    mat = _block_matrix(X)
    h_s = np.asarray(h_s, dtype=complex)
    l = mat.shape[1]
    if h_s.shape != (l,):
        raise DomainError(f"h_s must have length {l}")
    sigma_s2 = float(sigma_s2)
    if sigma_s2 <= 0:
        raise DomainError("sigma_s2 must be positive")
    if delta < 0:
        raise DomainError("delta must be >= 0")
    xh = mat @ h_s
    lam = 2.0 * float(np.real(np.vdot(xh, xh))) / sigma_s2
    return marcum_q(l, math.sqrt(lam), math.sqrt(2.0 * float(delta)))


def pod_closed_form(P, g_col, sigma_s2, N, delta, L):
    """Detection probability in the large-N limit.

    For N >> 1 the Gram matrix concentrates at N diag(P), giving the
    noncentrality 2 N sum_l P_l g_l / sigma_s2 and

        PoD = Q_L( sqrt(2 N sum_l P_l g_l / sigma_s2), sqrt(2 delta) ).
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    g_col = np.atleast_1d(np.asarray(g_col, dtype=float))
    if np.any(P < 0) or np.any(g_col < 0):
        raise DomainError("powers and gains must be nonnegative")
    if P.shape != g_col.shape:
        raise DomainError("P and g_col must have equal length")
    sigma_s2 = float(sigma_s2)
    if sigma_s2 <= 0:
        raise DomainError("sigma_s2 must be positive")
    a = math.sqrt(2.0 * N * float(np.dot(P, g_col)) / sigma_s2)
    return marcum_q(L, a, math.sqrt(2.0 * float(delta)))


def _as_seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _trial_rng(base, trial):
    """Counter-derived substream for one Monte Carlo trial.

    Trial t always consumes the same substream regardless of chunking or
    execution order, which is what makes every simulation output
    schedule independent.
    """
    ss = np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (trial,))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_blocks(setup, P, h, trials, seed, chunk=4096, want_h1=True):
    """Yield (s0, s1) statistic arrays for chunks of paired H0/H1 trials."""
    base = _as_seedseq(seed)
    sq_p = np.sqrt(np.atleast_1d(np.asarray(P, dtype=float)))
    n, l = setup.N, setup.L
    noise_scale = math.sqrt(setup.sigma_s2 / 2.0)
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        xs = np.empty((c, n, l), dtype=complex)
        noise = np.empty((c, n), dtype=complex)
        for j in range(c):
            rng = _trial_rng(base, done + j)
            re = rng.integers(0, 2, size=(n, l)) * 2 - 1
            im = rng.integers(0, 2, size=(n, l)) * 2 - 1
            xs[j] = (re + 1j * im) * _INV_SQRT2 * sq_p
            nre = rng.standard_normal(n)
            nim = rng.standard_normal(n)
            noise[j] = (nre + 1j * nim) * noise_scale
        s0 = glrt_statistic_batch(noise, xs, setup.sigma_s2)
        if want_h1:
            y1 = np.einsum("bnl,l->bn", xs, h) + noise
            s1 = glrt_statistic_batch(y1, xs, setup.sigma_s2)
        else:
            s1 = None
        yield s0, s1
        done += c


def sample_h0_statistics(setup, P, trials, seed, chunk=4096):
    """Array of `trials` GLRT statistics under H0 with fresh symbols per trial.

    Shares the trial substream contract with simulate_detection: the
    first k entries are identical for any larger trial count.
    """
    out = np.empty(trials)
    pos = 0
    zero_h = np.zeros(setup.L)
    for s0, _ in _simulate_blocks(setup, P, zero_h, trials, seed, chunk, want_h1=False):
        out[pos : pos + len(s0)] = s0
        pos += len(s0)
    return out


class DetectionSimResult(tuple):
    """(pfa_hat, pod_hat, (pfa_stderr, pod_stderr)) with named access."""

    __slots__ = ()

    def __new__(cls, pfa_hat, pod_hat, stderr):
        return super().__new__(cls, (pfa_hat, pod_hat, stderr))

    @property
    def pfa_hat(self):
        return self[0]

    @property
    def pod_hat(self):
        return self[1]

    @property
    def stderr(self):
        return self[2]


def simulate_detection(setup, P, realization, target, trials, seed, chunk=4096):
    """Monte Carlo false-alarm and detection rates for one target.

    Each trial draws a fresh QPSK block and noise vector from its own
    counter-derived substream, forms y under H0 (noise only) and H1
    (echoes of all L streams through the realized two-round gains plus
    the same noise), and compares the GLRT statistic to the threshold.
    Returns empirical exceedance rates with binomial standard errors.
    Deterministic per (seed, trials) regardless of chunking or schedule.

    The two-round coefficients enter the statistic only through their
    realized power gains; their phases influence the statistic's
    distribution only at fourth order for circularly distributed
    symbols, so the echo amplitudes are taken real, sqrt(g[l][target]).
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    h = np.sqrt(realization.g[:, target])
    hits0 = hits1 = 0
    for s0, s1 in _simulate_blocks(setup, P, h, trials, seed, chunk):
        hits0 += int(np.sum(s0 >= setup.delta))
        hits1 += int(np.sum(s1 >= setup.delta))
    pfa_hat = hits0 / trials
    pod_hat = hits1 / trials
    se = (
        math.sqrt(pfa_hat * (1.0 - pfa_hat) / trials),
        math.sqrt(pod_hat * (1.0 - pod_hat) / trials),
    )
    return DetectionSimResult(pfa_hat, pod_hat, se)


def pfa_closed_form(L, delta):
    """False-alarm probability at threshold delta (upper gamma tail)."""
    return upper_gamma_regularized(L, delta)
