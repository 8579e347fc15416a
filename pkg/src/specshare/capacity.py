"""Ergodic SU capacity: Monte Carlo over channel states, or nested quadrature.

The quadrature route integrates the per-state rate as a function of the
quality ratio ``z = gamma_s / gamma_sp`` and of ``gamma_ps`` only, which
is all the optimal policy depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .channels import ChannelState, FadingSpec, ScenarioSpec, power_pdf, ratio_pdf, sample_state
from .exceptions import DomainError
from .numerics import QuadratureSpec, RngStream, integrate
from .power import LN2, PowerPolicy, allocate, su_rate

__all__ = [
    "CapacityResult",
    "capacity_mc",
    "capacity_from_states",
    "capacity_quadrature",
    "awgn_capacity",
    "ratio_law",
]


@dataclass(frozen=True)
class CapacityResult:
    bits_per_hz: float
    std_error: float = 0.0
    method: str = "monte_carlo"
    n_samples: int = 0


def capacity_from_states(states: ChannelState, policy: PowerPolicy) -> CapacityResult:
    """Sample mean of the SU rate under ``policy`` with its standard error."""
    rate = su_rate(states, allocate(states, policy), policy.constraints.pu_power)
    n = rate.size
    se = float(np.std(rate, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return CapacityResult(float(np.mean(rate)), se, "monte_carlo", n)


def capacity_mc(
    scenario: ScenarioSpec, policy: PowerPolicy, n_samples: int, rng: RngStream
) -> CapacityResult:
    """Monte Carlo ergodic capacity on ``n_samples`` fresh states from ``rng``."""
    if n_samples < 10_000:
        raise DomainError("n_samples must be at least 1e4")
    return capacity_from_states(sample_state(scenario, rng, n_samples), policy)


def awgn_capacity(q_av, pu_power, gbar_s=1.0, gbar_sp=1.0, gbar_ps=1.0):
    """Closed form for deterministic links: the SU transmits at exactly ``q_av / gbar_sp``."""
    return math.log2(1.0 + gbar_s * q_av / (gbar_sp * (1.0 + gbar_ps * pu_power)))


@dataclass(frozen=True)
class _RatioLaw:
    point: float | None
    pdf: Callable[[float], float] | None
    scale: float


def ratio_law(scenario: ScenarioSpec) -> _RatioLaw:
    """Distribution of ``z = gamma_s / gamma_sp`` for the scenario's two links.

    Either a point mass or a closed-form density. Rician links on both
    sides have no closed form here and raise :class:`DomainError`.
    """
    s, sp = scenario.su_link, scenario.su_to_pu
    scale = s.mean_power / sp.mean_power
    if s.deterministic and sp.deterministic:
        return _RatioLaw(scale, None, scale)
    if sp.deterministic:
        g = sp.mean_power
        return _RatioLaw(None, lambda z: g * power_pdf(z * g, s), scale)
    if s.deterministic:
        g = s.mean_power
        return _RatioLaw(None, lambda z: g / z**2 * power_pdf(g / z, sp) if z > 0 else 0.0, scale)
    if s.is_rayleigh:
        return _RatioLaw(
            None, lambda z: ratio_pdf(z, sp.k_factor, s.mean_power, sp.mean_power), scale
        )
    if sp.is_rayleigh:
        # 1/z has the Rayleigh-over-Rician density with the roles swapped
        return _RatioLaw(
            None,
            lambda z: ratio_pdf(1.0 / z, s.k_factor, sp.mean_power, s.mean_power) / z**2
            if z > 0
            else 0.0,
            scale,
        )
    raise DomainError("no closed-form density of gamma_s/gamma_sp when both links are Rician")


def _rate_given_z(z, a, policy):
    c = policy.constraints
    z0 = policy.lam * LN2 * a
    t = policy.water_level
    z1 = a / (t - c.q_p) if t > c.q_p else math.inf
    if z <= z0:
        return 0.0
    if z <= z1:
        return math.log2(z / z0)
    return math.log2(1.0 + c.q_p * z / a)


def _inner(a, law, policy, quad):
    """Expected rate over z for a fixed interference-plus-noise level ``a``."""
    if law.point is not None:
        return _rate_given_z(law.point, a, policy)
    c = policy.constraints
    z0 = policy.lam * LN2 * a
    t = policy.water_level
    pts = [law.scale * f for f in (0.1, 1.0, 10.0)]
    if t > c.q_p:
        z1 = a / (t - c.q_p)
        wf = integrate(lambda z: math.log2(z / z0) * law.pdf(z), z0, z1, quad, pts)
        peak = integrate(
            lambda z: math.log2(1.0 + c.q_p * z / a) * law.pdf(z), z1, math.inf, quad, pts
        )
        return wf + peak
    return integrate(lambda z: math.log2(z / z0) * law.pdf(z), z0, math.inf, quad, pts)


def _power_quantile_upper(spec: FadingSpec, tail_mass):
    scale = spec.mean_power / (2.0 * (spec.k_factor + 1.0))
    if spec.k_factor == 0:
        return float(stats.chi2.isf(tail_mass, 2, scale=scale))
    return float(stats.ncx2.isf(tail_mass, 2, 2.0 * spec.k_factor, scale=scale))


def capacity_quadrature(
    scenario: ScenarioSpec, policy: PowerPolicy, quad: QuadratureSpec | None = None
) -> CapacityResult:
    """Semi-analytic ergodic capacity.

    The outer expectation over ``gamma_ps`` is a point evaluation for a
    deterministic link, otherwise a quadrature against the Rician power
    density truncated where the upper tail mass drops below
    ``quad.tail_cutoff_mass``. When ``1/(lam ln2) <= Q_p`` the peak
    branch is empty and only the water-filling integral remains.
    """
    quad = quad or QuadratureSpec()
    law = ratio_law(scenario)
    ps = scenario.pu_to_su
    pu = scenario.pu_power
    inner_quad = QuadratureSpec(
        rel_tol=min(quad.rel_tol, 1e-10),
        abs_tol=min(quad.abs_tol, 1e-13),
        max_subdivisions=quad.max_subdivisions,
        tail_cutoff_mass=quad.tail_cutoff_mass,
    )
    if ps.deterministic:
        value = _inner(1.0 + ps.mean_power * pu, law, policy, inner_quad)
    else:
        upper = _power_quantile_upper(ps, quad.tail_cutoff_mass)
        value = integrate(
            lambda g: _inner(1.0 + g * pu, law, policy, inner_quad) * power_pdf(g, ps),
            0.0,
            upper,
            quad,
            [ps.mean_power],
        )
    return CapacityResult(value, 0.0, "quadrature", 0)
