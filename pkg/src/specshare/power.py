"""Optimal SU power allocation under joint average/peak interference limits.

The per-state rule is the KKT solution of the Lagrangian
``log2(1 + g_s P / A) - lam * g_sp * P`` on ``0 <= P <= Q_p / g_sp`` with
``A = 1 + g_ps * gbar_p``. The multiplier is found by bisection on a
fixed sample set so the average-interference constraint holds with
equality on that set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .channels import ChannelState, ScenarioSpec, sample_state
from .exceptions import DomainError, SolverError
from .numerics import RngStream

__all__ = [
    "ConstraintSet",
    "PowerPolicy",
    "PowerAllocator",
    "allocate",
    "average_interference",
    "fit_lambda",
    "solve_lambda",
    "su_rate",
]

LN2 = math.log(2.0)

_LAMBDA_BRACKET = (1e-6, 1e3)
_LAMBDA_LIMITS = (1e-15, 1e15)


@dataclass(frozen=True)
class ConstraintSet:
    """Interference limits at the PU receiver and the PU transmit power.

    ``q_p`` may be ``math.inf`` for an average-only constraint.
    """

    q_av: float
    q_p: float = math.inf
    pu_power: float = 10 ** 0.1

    def __post_init__(self):
        if not (self.q_av > 0 and math.isfinite(self.q_av)):
            raise DomainError("q_av must be positive and finite")
        if not self.q_p > self.q_av:
            raise DomainError("peak limit q_p must exceed the average limit q_av")
        if not (self.pu_power >= 0 and math.isfinite(self.pu_power)):
            raise DomainError("pu_power must be >= 0 and finite")

    @classmethod
    def from_rho(cls, q_av, rho=math.inf, pu_power=10 ** 0.1):
        """Limits with ``q_p = rho * q_av``."""
        return cls(q_av, rho * q_av, pu_power)

    @property
    def rho(self):
        return self.q_p / self.q_av


@dataclass(frozen=True)
class PowerPolicy:
    """Lagrange multiplier plus the limits it was solved for.

    ``slack`` is set when even the smallest multiplier tried leaves the
    average constraint inactive.
    """

    lam: float
    constraints: ConstraintSet
    slack: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError("lambda must be positive and finite")

    @property
    def water_level(self):
        """``1 / (lam ln 2)``, the interference level of the water-filling branch."""
        return 1.0 / (self.lam * LN2)


def _unpack(state):
    if isinstance(state, ChannelState):
        parts = (state.gamma_s, state.gamma_sp, state.gamma_ps)
    else:
        X = np.asarray(state, dtype=float)
        parts = (X[..., 0], X[..., 1], X[..., 2])
    return np.broadcast_arrays(*(np.asarray(p, dtype=float) for p in parts))


def allocate(state, policy: PowerPolicy):
    """Optimal SU transmit power for each channel state.

    Parameters
    ----------
    state : ChannelState or array_like of shape (..., 3)
        Channel powers ``(gamma_s, gamma_sp, gamma_ps)``.
    policy : PowerPolicy

    Returns
    -------
    float or ndarray
        With ``z = gamma_s / gamma_sp`` and ``A = 1 + gamma_ps gbar_p``:
        zero when ``z <= lam ln2 A``, ``Q_p / gamma_sp`` when
        ``1/(lam ln2) > Q_p`` and ``z >= A / (1/(lam ln2) - Q_p)``, and
        the water-filling level ``1/(lam ln2 gamma_sp) - A/gamma_s``
        in between.
    """
    gs, gsp, gps = _unpack(state)
    c = policy.constraints
    lam_ln2 = policy.lam * LN2
    t = 1.0 / lam_ln2
    A = 1.0 + gps * c.pu_power
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(gs > 0, gs / gsp, 0.0)
        p = t / gsp - A / gs
        if t > c.q_p:
            p = np.where(z >= A / (t - c.q_p), c.q_p / gsp, p)
        p = np.where(z <= lam_ln2 * A, 0.0, p)
    return float(p) if p.ndim == 0 else p


def su_rate(state, power, pu_power):
    """Instantaneous SU rate ``log2(1 + g_s P / (g_ps gbar_p + 1))`` in bits/s/Hz."""
    gs, _, gps = _unpack(state)
    return np.log2(1.0 + gs * np.asarray(power) / (gps * pu_power + 1.0))


def average_interference(state, policy: PowerPolicy) -> float:
    """Sample mean of ``gamma_sp * P_s`` over the given states."""
    _, gsp, _ = _unpack(state)
    with np.errstate(invalid="ignore"):
        return float(np.mean(gsp * allocate(state, policy)))


def fit_lambda(state, constraints: ConstraintSet, rel_tol=1e-6) -> PowerPolicy:
    """Multiplier making the sample-average interference equal ``q_av``.

    Geometric bisection; the average interference is continuous and
    non-increasing in the multiplier. The initial bracket is widened by
    factors of ten until it straddles the target.
    """
    if not 0 < rel_tol <= 0.05:
        raise DomainError("rel_tol must lie in (0, 0.05]")
    q = constraints.q_av

    def interference(lam):
        return average_interference(state, PowerPolicy(lam, constraints))

    lo, hi = _LAMBDA_BRACKET
    seen = []
    i_hi = interference(hi)
    seen.append(i_hi)
    while not i_hi < q:
        if hi >= _LAMBDA_LIMITS[1]:
            raise SolverError(
                f"average interference stays above q_av={q} for lambda up to {hi:g}",
                (min(seen), max(seen)),
            )
        hi *= 10.0
        i_hi = interference(hi)
        seen.append(i_hi)
    i_lo = interference(lo)
    seen.append(i_lo)
    while not i_lo > q:
        if lo <= _LAMBDA_LIMITS[0]:
            if np.isfinite(i_lo):
                return PowerPolicy(lo, constraints, slack=True)
            raise SolverError("average interference is not finite", (min(seen), max(seen)))
        lo /= 10.0
        i_lo = interference(lo)
        seen.append(i_lo)

    for _ in range(200):
        mid = math.sqrt(lo * hi)
        i_mid = interference(mid)
        if abs(i_mid / q - 1.0) <= rel_tol:
            return PowerPolicy(mid, constraints)
        if i_mid > q:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    return PowerPolicy(math.sqrt(lo * hi), constraints)


def solve_lambda(
    scenario: ScenarioSpec,
    constraints: ConstraintSet,
    n_samples: int,
    rng: RngStream,
    rel_tol=1e-6,
) -> PowerPolicy:
    """Solve the multiplier on ``n_samples`` states drawn from ``rng``.

    The states are a pure function of ``rng``; passing the same stream to
    :func:`specshare.capacity.capacity_mc` evaluates the policy on the
    very sample set it was fitted on.
    """
    if n_samples < 10_000:
        raise DomainError("n_samples must be at least 1e4")
    if not math.isclose(scenario.pu_power, constraints.pu_power, rel_tol=1e-12):
        raise DomainError("scenario and constraints disagree on the PU power")
    states = sample_state(scenario, rng, n_samples)
    return fit_lambda(states, constraints, rel_tol)


class PowerAllocator(BaseEstimator):
    """Estimator wrapper around :func:`fit_lambda` / :func:`allocate`.

    ``X`` is an array of shape (n_samples, 3) holding channel powers
    ``(gamma_s, gamma_sp, gamma_ps)`` per row.

    Parameters
    ----------
    q_av : float, default=1.0
        Average interference limit.
    rho : float, default=inf
        Peak-to-average ratio, ``q_p = rho * q_av``.
    pu_power : float, default=10**0.1
        PU transmit power (noise-normalised).
    rel_tol : float, default=1e-6
        Relative tolerance on the average constraint.

    Attributes
    ----------
    lambda_ : float
        Fitted Lagrange multiplier.
    policy_ : PowerPolicy
    slack_ : bool
        True if the average constraint could not be made active.
    n_features_in_ : int
        Always 3.

    Examples
    --------
    >>> from specshare import PowerAllocator, ScenarioSpec, RngStream, sample_state
    >>> X = sample_state(ScenarioSpec.named("rayleigh-rayleigh"), RngStream(1), 20000).as_array()
    >>> est = PowerAllocator(q_av=1.0).fit(X)
    >>> round(float((X[:, 1] * est.predict(X)).mean()), 6)
    1.0
    """

    def __init__(self, q_av=1.0, rho=math.inf, pu_power=10 ** 0.1, rel_tol=1e-6):
        self.q_av = q_av
        self.rho = rho
        self.pu_power = pu_power
        self.rel_tol = rel_tol

    def _validate(self, X, reset):
        X = check_array(X, dtype=float, ensure_all_finite=True)
        if X.shape[1] != 3:
            raise ValueError(f"X must have 3 columns (gamma_s, gamma_sp, gamma_ps), got {X.shape[1]}")
        if np.any(X < 0):
            raise ValueError("channel powers must be non-negative")
        if reset:
            self.n_features_in_ = 3
        return X

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        constraints = ConstraintSet.from_rho(self.q_av, self.rho, self.pu_power)
        self.policy_ = fit_lambda(X, constraints, self.rel_tol)
        self.lambda_ = self.policy_.lam
        self.slack_ = self.policy_.slack
        return self

    def predict(self, X):
        """Transmit power per row."""
        check_is_fitted(self, "policy_")
        return allocate(self._validate(X, reset=False), self.policy_)

    def interference(self, X):
        """Mean interference ``gamma_sp * P_s`` caused on ``X``."""
        check_is_fitted(self, "policy_")
        return average_interference(self._validate(X, reset=False), self.policy_)

    def score(self, X, y=None):
        """Ergodic SU capacity (bits/s/Hz) of the fitted policy on ``X``."""
        X = self._validate(X, reset=False)
        return float(np.mean(su_rate(X, self.predict(X), self.pu_power)))
