"""Random aerial precoding over ESPAR basis patterns.

Every instant the SU draws i.i.d. uniform phases for its ``M`` basis
patterns (amplitude ``1/sqrt(M)`` each). The specular parts seen through
the different patterns then add with random phases, which turns a
line-of-sight interference link into an approximately Rayleigh one
without changing its mean power.

On the SU link a Rician channel can be kept reliable with "smart" receive
patterns: MRC weights computed from the transmit phases and the known
specular phase matrix alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .channels import ChannelState, FadingSpec, ScenarioSpec
from .exceptions import DomainError
from .numerics import RngStream

__all__ = [
    "TxWeights",
    "BasisChannelSet",
    "PhaseProfiles",
    "RapLinkState",
    "RandomAerialPrecoder",
    "random_tx_weights",
    "frozen_phase_profiles",
    "sample_basis_channels",
    "equivalent_gain",
    "equivalent_los",
    "mrc_receive_weights",
    "rap_link_step",
    "ks_rayleigh",
    "kolmogorov_sf",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TxWeights:
    """Basis-pattern weights ``exp(j theta_m) / sqrt(M)``.

    ``phases`` has shape ``(..., M)``; leading axes index time instants.
    """

    phases: np.ndarray

    @property
    def m(self):
        return np.shape(self.phases)[-1]

    @property
    def amplitude(self):
        return 1.0 / math.sqrt(self.m)

    @property
    def weights(self):
        return np.exp(1j * np.asarray(self.phases)) * self.amplitude


@dataclass(frozen=True)
class BasisChannelSet:
    """Per-basis-pattern gains ``h^m`` of one link, shape ``(..., M)``."""

    gains: np.ndarray
    k_factor: float
    mean_power: float
    los_phases: np.ndarray
    deterministic: bool = False

    @property
    def specular_fraction(self):
        return 1.0 if self.deterministic else self.k_factor / (self.k_factor + 1.0)


@dataclass(frozen=True)
class PhaseProfiles:
    """Frozen LoS phases: ``sp`` (M_tx,), ``ps`` (M_rx,), ``s`` (M_rx, M_tx)."""

    sp: np.ndarray
    ps: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class RapLinkState:
    """Equivalent channels after precoding; arrays over instants ``k``.

    ``specular_s`` is the combined specular SU-link term
    ``sum_u w^R_u l_{s,u}`` (without the ``sqrt(gbar_s)`` factor).
    """

    h_s: np.ndarray
    h_sp: np.ndarray
    h_ps: np.ndarray
    specular_s: np.ndarray
    k: np.ndarray

    def state(self) -> ChannelState:
        return ChannelState(np.abs(self.h_s) ** 2, np.abs(self.h_sp) ** 2, np.abs(self.h_ps) ** 2)


def _shape(size):
    return () if size is None else tuple(np.atleast_1d(size))


def random_tx_weights(m: int, rng: RngStream, size=None) -> TxWeights:
    """I.i.d. Uniform[0, 2 pi) phases for ``m`` patterns per instant."""
    if m < 1:
        raise DomainError("need at least one basis pattern")
    return TxWeights(TWO_PI * rng.generator().random(_shape(size) + (m,)))


def frozen_phase_profiles(m_tx: int, m_rx: int, rng: RngStream) -> PhaseProfiles:
    """Draw LoS phase profiles once; they stay fixed for an experiment."""
    gen = rng.generator()
    return PhaseProfiles(
        sp=TWO_PI * gen.random(m_tx),
        ps=TWO_PI * gen.random(m_rx),
        s=TWO_PI * gen.random((m_rx, m_tx)),
    )


def sample_basis_channels(m: int, spec: FadingSpec, phase_profile, rng: RngStream, size=None):
    """Rician gains per basis pattern, common K and mean power, own LoS phase.

    Scattered parts are independent across patterns and instants.
    """
    phase_profile = np.asarray(phase_profile, dtype=float)
    if phase_profile.shape[-1] != m:
        raise DomainError(f"phase profile has {phase_profile.shape[-1]} entries, expected {m}")
    shape = _shape(size) + phase_profile.shape
    los = math.sqrt(spec.mean_power * spec.specular_fraction) * np.exp(1j * phase_profile)
    if spec.deterministic:
        gains = np.broadcast_to(los, shape).astype(complex)
    else:
        z = rng.generator().standard_normal((2,) + shape)
        scale = math.sqrt(spec.mean_power * 0.5 / (spec.k_factor + 1.0))
        gains = los + scale * (z[0] + 1j * z[1])
    return BasisChannelSet(gains, spec.k_factor, spec.mean_power, phase_profile, spec.deterministic)


def _weights(weights):
    return weights.weights if isinstance(weights, TxWeights) else np.asarray(weights, dtype=complex)


def equivalent_gain(weights, channels: BasisChannelSet):
    """``sum_m w_m h^m``; ``weights`` is a :class:`TxWeights` or complex array."""
    w = _weights(weights)
    if w.shape[-1] != channels.gains.shape[-1]:
        raise DomainError("weights and basis channels differ in pattern count")
    return np.sum(w * channels.gains, axis=-1)


def equivalent_los(weights, channels: BasisChannelSet):
    """Specular part only: ``sum_m w_m sqrt(K/(K+1)) exp(j phi_m)``."""
    w = _weights(weights)
    if w.shape[-1] != np.shape(channels.los_phases)[-1]:
        raise DomainError("weights and basis channels differ in pattern count")
    return np.sum(w * np.exp(1j * channels.los_phases), axis=-1) * math.sqrt(channels.specular_fraction)


def mrc_receive_weights(specular):
    """MRC weights ``conj(l_u) / ||l||`` over receive patterns (last axis).

    Raises
    ------
    DomainError
        If any specular vector is identically zero (no LoS to combine).
    """
    l = np.asarray(specular, dtype=complex)
    norm = np.linalg.norm(l, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("MRC weights undefined for an all-zero specular vector")
    return l.conj() / norm


def rap_link_step(
    scenario: ScenarioSpec,
    m_tx: int,
    m_rx: int,
    smart_rx: bool,
    phase_profiles: PhaseProfiles,
    rng: RngStream,
    size=None,
) -> RapLinkState:
    """Equivalent channels of all three links for ``size`` instants.

    The SU transmitter applies random phases to its ``m_tx`` patterns.
    The SU receiver combines its ``m_rx`` patterns with random phases,
    or with ``smart_rx`` the SU link uses the MRC weights of its specular
    components instead. The PU-to-SU link is always combined with the
    random phases.
    """
    if m_tx < 1 or m_rx < 1:
        raise DomainError("m_tx and m_rx must be >= 1")
    if smart_rx and scenario.su_link.is_rayleigh:
        raise DomainError("smart receive patterns need a LoS component on the SU link")
    shape = _shape(size)
    w_tx = random_tx_weights(m_tx, rng.child(0), size)

    sp = sample_basis_channels(m_tx, scenario.su_to_pu, phase_profiles.sp, rng.child(2), size)
    h_sp = equivalent_gain(w_tx, sp)

    s = sample_basis_channels(m_tx, scenario.su_link, phase_profiles.s, rng.child(4), size)
    per_rx = equivalent_gain(w_tx.weights[..., None, :], s)
    los_per_rx = equivalent_los(w_tx.weights[..., None, :], s)
    w_dumb = random_tx_weights(m_rx, rng.child(1), size).weights
    w_rx = mrc_receive_weights(los_per_rx) if smart_rx else w_dumb
    h_s = np.sum(w_rx * per_rx, axis=-1)
    specular = np.sum(w_rx * los_per_rx, axis=-1)

    # the PU-to-SU link always sees random receive phases
    ps = sample_basis_channels(m_rx, scenario.pu_to_su, phase_profiles.ps, rng.child(3), size)
    h_ps = equivalent_gain(w_dumb, ps)
    return RapLinkState(h_s, h_sp, h_ps, specular, np.arange(int(np.prod(shape))).reshape(shape))


def kolmogorov_sf(x):
    """Asymptotic Kolmogorov survival ``P[sqrt(n) D > x]``.

    Alternating series ``2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)`` (100 terms)
    for ``x >= 1``; the equivalent theta-function form below that, where
    the alternating series converges slowly.
    """
    if x <= 0:
        return 1.0
    k = np.arange(1, 101)
    if x >= 1.0:
        p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * x**2))
    else:
        cdf = math.sqrt(TWO_PI) / x * np.sum(np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * x**2)))
        p = 1.0 - cdf
    return float(min(max(p, 0.0), 1.0))


def ks_rayleigh(amplitude_samples, mean_power=1.0):
    """One-sample KS test of amplitudes against ``F(a) = 1 - exp(-a^2 / gbar)``.

    Returns
    -------
    statistic : float
    p_value : float
        From the asymptotic Kolmogorov distribution.
    """
    a = np.sort(np.abs(np.asarray(amplitude_samples, dtype=float).ravel()))
    n = a.size
    if n < 100:
        raise DomainError("KS asymptotics need at least 100 samples")
    cdf = -np.expm1(-(a**2) / mean_power)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
    return float(d), kolmogorov_sf(math.sqrt(n) * d)


class RandomAerialPrecoder(TransformerMixin, BaseEstimator):
    """Transformer from per-pattern gains to randomly precoded equivalent gains.

    ``X`` is a complex array of shape (n_instants, n_patterns); each row
    is combined with fresh uniform phases drawn from the stream
    ``(seed, stream_id)``, so a given input always maps to the same output.

    Parameters
    ----------
    seed : int, default=0
    stream_id : int, default=0
    """

    def __init__(self, seed=0, stream_id=0):
        self.seed = seed
        self.stream_id = stream_id

    def _validate(self, X):
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D array of per-pattern gains, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("gains must be finite")
        return X.astype(complex)

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        return self

    def weights(self, n_instants):
        """The phase weights applied to the first ``n_instants`` rows."""
        check_is_fitted(self, "n_features_in_")
        return random_tx_weights(self.n_features_in_, RngStream(self.seed, self.stream_id), n_instants)

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = self._validate(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} patterns, fitted with {self.n_features_in_}")
        return np.sum(self.weights(X.shape[0]).weights * X, axis=1)
