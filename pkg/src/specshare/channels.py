"""Rician / Rayleigh fading models for the three links of the sharing system.

Powers are noise-normalised (N_o = 1), so a channel power multiplied by
a transmit power is directly an SNR. The K -> infinity limit is carried
by an explicit ``deterministic`` flag instead of a huge K-factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError
from .numerics import RngStream, laguerre_half

__all__ = [
    "FadingSpec",
    "ScenarioSpec",
    "ChannelState",
    "SCENARIOS",
    "sample_gain",
    "power_pdf",
    "amplitude_variance",
    "ratio_pdf",
    "ratio_sf",
    "sample_state",
]

TWO_PI = 2.0 * math.pi

#: Scenario labels, read "interference fading - SU-link fading".
SCENARIOS = (
    "awgn",
    "rician-rician",
    "rician-rayleigh",
    "rayleigh-rayleigh",
    "rayleigh-rician",
)


@dataclass(frozen=True)
class FadingSpec:
    """Fading law of one link.

    Attributes
    ----------
    k_factor : float
        Linear Rician K-factor; 0 gives Rayleigh fading.
    mean_power : float
        Average channel power E[|h|^2].
    los_phase : float
        Phase of the specular component, radians in [0, 2*pi).
    deterministic : bool
        K -> infinity limit: ``h = sqrt(mean_power) * exp(j * los_phase)``.
    """

    k_factor: float = 0.0
    mean_power: float = 1.0
    los_phase: float = 0.0
    deterministic: bool = False

    def __post_init__(self):
        if not (self.mean_power > 0 and math.isfinite(self.mean_power)):
            raise DomainError("mean_power must be positive and finite")
        if not (self.k_factor >= 0 and math.isfinite(self.k_factor)):
            raise DomainError("k_factor must be >= 0 and finite")
        if not 0 <= self.los_phase < TWO_PI:
            raise DomainError("los_phase must lie in [0, 2*pi)")

    @classmethod
    def rayleigh(cls, mean_power=1.0):
        return cls(0.0, mean_power)

    @classmethod
    def rician(cls, k_factor, mean_power=1.0, los_phase=0.0):
        return cls(float(k_factor), mean_power, float(los_phase) % TWO_PI)

    @classmethod
    def awgn(cls, mean_power=1.0, los_phase=0.0):
        return cls(0.0, mean_power, float(los_phase) % TWO_PI, True)

    @property
    def is_rayleigh(self):
        return not self.deterministic and self.k_factor == 0

    @property
    def specular_fraction(self):
        """K / (K + 1), the share of power in the LoS component."""
        if self.deterministic:
            return 1.0
        return self.k_factor / (self.k_factor + 1.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Fading of the SU link, both interference links and the PU power."""

    su_link: FadingSpec
    su_to_pu: FadingSpec
    pu_to_su: FadingSpec
    pu_power: float
    label: str = "custom"

    def __post_init__(self):
        if not (self.pu_power >= 0 and math.isfinite(self.pu_power)):
            raise DomainError("pu_power must be >= 0 and finite")

    @classmethod
    def named(
        cls,
        label,
        k_factor=10.0,
        gbar_s=1.0,
        gbar_sp=1.0,
        gbar_ps=1.0,
        pu_power=10 ** 0.1,
    ):
        """Build one of :data:`SCENARIOS`.

        ``k_factor`` is linear; a scalar applies to every Rician link, a
        3-tuple gives ``(K_s, K_sp, K_ps)``.
        """
        if label not in SCENARIOS:
            raise DomainError(f"unknown scenario {label!r}; expected one of {SCENARIOS}")
        if label == "awgn":
            links = [FadingSpec.awgn(g) for g in (gbar_s, gbar_sp, gbar_ps)]
        else:
            interference, su = label.split("-")
            ks = tuple(k_factor) if np.ndim(k_factor) else (k_factor,) * 3

            def make(kind, k, g):
                return FadingSpec.rician(k, g) if kind == "rician" else FadingSpec.rayleigh(g)

            links = [
                make(su, ks[0], gbar_s),
                make(interference, ks[1], gbar_sp),
                make(interference, ks[2], gbar_ps),
            ]
        return cls(*links, pu_power=pu_power, label=label)


@dataclass(frozen=True)
class ChannelState:
    """Channel powers (gamma_s, gamma_sp, gamma_ps); scalars or equal-length arrays."""

    gamma_s: np.ndarray
    gamma_sp: np.ndarray
    gamma_ps: np.ndarray

    def as_array(self):
        """Stack into an ``(n, 3)`` array with columns s, sp, ps."""
        return np.column_stack(
            [np.atleast_1d(self.gamma_s), np.atleast_1d(self.gamma_sp), np.atleast_1d(self.gamma_ps)]
        )

    @classmethod
    def from_array(cls, X):
        X = np.asarray(X, dtype=float)
        return cls(X[:, 0], X[:, 1], X[:, 2])

    def __len__(self):
        return np.atleast_1d(self.gamma_s).shape[0]


def sample_gain(spec: FadingSpec, rng: RngStream, size=None):
    """Draw complex gains ``sqrt(g) * (sqrt(K/(K+1)) e^{j phi} + v)``.

    ``v`` is circular complex Gaussian with variance ``1/(K+1)``.
    """
    amp = math.sqrt(spec.mean_power)
    los = amp * math.sqrt(spec.specular_fraction) * complex(math.cos(spec.los_phase), math.sin(spec.los_phase))
    shape = () if size is None else tuple(np.atleast_1d(size))
    if spec.deterministic:
        out = np.full(shape, los, dtype=complex)
    else:
        z = rng.generator().standard_normal((2,) + shape)
        scale = amp * math.sqrt(0.5 / (spec.k_factor + 1.0))
        out = los + scale * (z[0] + 1j * z[1])
    return complex(out) if size is None else out


def _require_random(spec):
    if spec.deterministic:
        raise DomainError("deterministic link has a point-mass power distribution")


def power_pdf(gamma, spec: FadingSpec):
    """Density of the channel power |h|^2 for a Rician link.

    Evaluated in log space with a scaled Bessel function, so large
    K-factors do not overflow.
    """
    _require_random(spec)
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise DomainError("gamma must be finite and >= 0")
    k, gbar = spec.k_factor, spec.mean_power
    x = 2.0 * np.sqrt(k * (1.0 + k) * g / gbar)
    with np.errstate(divide="ignore"):
        logf = (
            math.log((1.0 + k) / gbar)
            - k
            - (1.0 + k) * g / gbar
            + np.log(special.ive(0, x))
            + x
        )
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def amplitude_variance(spec: FadingSpec) -> float:
    """Variance of the Rician amplitude |h|.

    Uses ``2 s^2 + nu^2 - (pi s^2 / 2) L_{1/2}^2(-nu^2 / (2 s^2))`` with
    ``nu^2 = g K/(K+1)`` and ``2 s^2 = g/(K+1)``.
    """
    _require_random(spec)
    k, gbar = spec.k_factor, spec.mean_power
    nu2 = gbar * k / (k + 1.0)
    two_s2 = gbar / (k + 1.0)
    lag = laguerre_half(-nu2 / two_s2)
    return max(two_s2 + nu2 - (math.pi * two_s2 / 4.0) * lag * lag, 0.0)


def _check_ratio_args(z, k_sp, gbar_s, gbar_sp):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or not np.all(np.isfinite(z)):
        raise DomainError("z must be finite and >= 0")
    if not (k_sp >= 0 and math.isfinite(k_sp)):
        raise DomainError("k_sp must be >= 0 and finite")
    if not (gbar_s > 0 and gbar_sp > 0):
        raise DomainError("mean powers must be positive")
    return z


def ratio_pdf(z, k_sp, gbar_s, gbar_sp):
    """Density of ``z = gamma_s / gamma_sp`` for Rayleigh gamma_s and Rician gamma_sp.

    At ``k_sp = 0`` this is the log-logistic density
    ``c / (1 + c z)^2`` with ``c = gbar_sp / gbar_s``.
    """
    z = _check_ratio_args(z, k_sp, gbar_s, gbar_sp)
    c = gbar_sp / gbar_s
    cz = c * z
    if k_sp == 0:
        out = c / (1.0 + cz) ** 2
    else:
        k1 = 1.0 + k_sp
        d = k1 + cz
        out = c * (k1**3 + cz * k1) / d**3 * np.exp(-k_sp * cz / d)
    return float(out) if out.ndim == 0 else out


def ratio_sf(z, k_sp, gbar_s, gbar_sp):
    """Survival function P[Z > z] matching :func:`ratio_pdf`.

    Equals the moment generating function of the Rician power evaluated
    at ``-z / gbar_s``.
    """
    z = _check_ratio_args(z, k_sp, gbar_s, gbar_sp)
    c = gbar_sp / gbar_s
    k1 = 1.0 + k_sp
    d = k1 + c * z
    out = k1 / d * np.exp(-k_sp * c * z / d)
    return float(out) if out.ndim == 0 else out


def sample_state(scenario: ScenarioSpec, rng: RngStream, size=None) -> ChannelState:
    """Independent draws of the three channel powers.

    Each link reads its own child stream of ``rng``, so adding or
    removing links never shifts another link's samples.
    """
    powers = [
        np.abs(sample_gain(spec, rng.child(i), size)) ** 2
        for i, spec in enumerate((scenario.su_link, scenario.su_to_pu, scenario.pu_to_su))
    ]
    if size is None:
        powers = [float(p) for p in powers]
    return ChannelState(*powers)
