"""ESPAR antenna model and its beamspace (basis-pattern) decomposition.

An ``M``-element array has one driven element and ``M - 1`` parasitics
terminated in reactances. Element currents follow from the admittance
matrix; the far-field pattern is ``P(theta) = i^T a(theta)``. Gram-Schmidt
on the sampled steering functions gives ``M`` orthonormal basis patterns
so that ``P = sum_n w_n Phi_n`` with ``w_n = i^T q_n``.

Inner products on the azimuth circle use the uniform-grid rule
``<f, g> = (2 pi / G) sum_g f(theta_g) conj(g(theta_g))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ConditioningError, ConfigError, RankDeficiencyError

__all__ = [
    "EsparGeometry",
    "ReactiveLoads",
    "BasisSet",
    "circular_geometry",
    "load_geometry",
    "default_geometry",
    "currents",
    "basis_decompose",
    "pattern_from_currents",
    "basis_weights",
    "pattern_from_weights",
]

SOURCE_RESISTANCE = 50.0
_MAX_CONDITION = 1e12
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class EsparGeometry:
    """Admittance matrix plus steering samples on a uniform azimuth grid."""

    m: int
    admittance: np.ndarray
    angle_grid: np.ndarray
    steering: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.admittance, dtype=complex)
        if Y.shape != (self.m, self.m):
            raise ValueError(f"admittance must be {self.m}x{self.m}, got {Y.shape}")
        if not np.allclose(Y, Y.T, rtol=1e-12, atol=1e-15):
            raise ValueError("admittance matrix must be symmetric (reciprocity)")
        if np.linalg.cond(Y) > _MAX_CONDITION:
            raise ValueError("admittance matrix is singular or ill-conditioned")
        G = len(self.angle_grid)
        if G < 8 * self.m:
            raise ValueError(f"angle grid needs at least {8 * self.m} points, got {G}")
        if np.shape(self.steering) != (G, self.m):
            raise ValueError(f"steering must have shape ({G}, {self.m})")
        object.__setattr__(self, "admittance", Y)

    @property
    def grid_weight(self):
        return 2.0 * math.pi / len(self.angle_grid)


@dataclass(frozen=True)
class ReactiveLoads:
    """Reactances (ohms) on the ``M - 1`` parasitic ports."""

    x: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if not all(math.isfinite(v) for v in x):
            raise ValueError("reactances must be finite")
        object.__setattr__(self, "x", x)

    def load_matrix(self, m):
        if len(self.x) != m - 1:
            raise ValueError(f"expected {m - 1} reactances, got {len(self.x)}")
        return np.diag(np.concatenate([[SOURCE_RESISTANCE], 1j * np.asarray(self.x)]))


@dataclass(frozen=True)
class BasisSet:
    """Orthonormal basis-pattern samples and projection vectors.

    ``phi[:, n]`` samples ``Phi_n`` on the grid; ``projections[:, n]`` is
    ``q_n``, whose entry ``m`` is ``<a_m, Phi_n>``.
    """

    phi: np.ndarray
    projections: np.ndarray
    grid_weight: float = field(default=1.0)

    def gram(self):
        return self.grid_weight * (self.phi.conj().T @ self.phi)


def circular_geometry(m=5, radius_wavelengths=0.25, grid_size=360, admittance=None):
    """Active element at the centre, ``m - 1`` parasitics on a circle.

    Steering of element ``k`` at azimuth ``psi_k`` is
    ``exp(j 2 pi r cos(theta - psi_k))`` with ``r`` in wavelengths; the
    active element has ``a_0 = 1``. Without an admittance matrix the
    elements are taken as decoupled 50-ohm ports.
    """
    theta = 2.0 * math.pi * np.arange(grid_size) / grid_size
    steering = np.ones((grid_size, m), dtype=complex)
    for k in range(1, m):
        psi = 2.0 * math.pi * (k - 1) / (m - 1)
        steering[:, k] = np.exp(2j * math.pi * radius_wavelengths * np.cos(theta - psi))
    if admittance is None:
        admittance = np.eye(m) / SOURCE_RESISTANCE
    return EsparGeometry(m, np.asarray(admittance, dtype=complex), theta, steering)


def _parse_complex(token, lineno):
    try:
        re, im = token.split(",")
        return complex(float(re), float(im))
    except ValueError:
        raise ConfigError(f"line {lineno}: bad complex entry {token!r}, expected 're,im'") from None


def load_geometry(path) -> EsparGeometry:
    """Read a geometry file.

    Format: ``key = value`` lines for ``m``, ``radius_wavelengths`` and
    ``grid_size``, then a line ``admittance:`` followed by ``m`` rows of
    whitespace-separated ``re,im`` pairs. ``#`` starts a comment.
    """
    if not hasattr(path, "read_text"):
        path = Path(path)
    text = path.read_text()
    values = {}
    rows = []
    in_matrix = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if in_matrix:
            rows.append([_parse_complex(tok, lineno) for tok in line.split()])
            continue
        if line.rstrip(":") == "admittance" and line.endswith(":"):
            in_matrix = True
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    try:
        m = int(values.get("m", 5))
        radius = float(values.get("radius_wavelengths", 0.25))
        grid = int(values.get("grid_size", 360))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(values) - {"m", "radius_wavelengths", "grid_size"}
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    Y = None
    if rows:
        if len(rows) != m or any(len(r) != m for r in rows):
            raise ConfigError(f"admittance block must be {m}x{m}")
        Y = np.array(rows)
    try:
        return circular_geometry(m, radius, grid, Y)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def default_geometry() -> EsparGeometry:
    """The shipped 5-element example (``data/espar5.cfg``)."""
    return load_geometry(resources.files("specshare") / "data" / "espar5.cfg")


def currents(geometry: EsparGeometry, loads: ReactiveLoads, v_s=1.0) -> np.ndarray:
    """Element currents ``v_s (Y^-1 + X)^-1 u`` with ``X = diag(50, jX_1, ...)``."""
    m = geometry.m
    system = np.linalg.inv(geometry.admittance) + loads.load_matrix(m)
    cond = np.linalg.cond(system)
    if not cond < _MAX_CONDITION:
        raise ConditioningError(f"load system is ill-conditioned (cond = {cond:.3g})", cond)
    u = np.zeros(m, dtype=complex)
    u[0] = 1.0
    return v_s * np.linalg.solve(system, u)


def basis_decompose(geometry: EsparGeometry) -> BasisSet:
    """Modified Gram-Schmidt (two passes) over the steering columns."""
    w = geometry.grid_weight
    A = geometry.steering
    G, m = A.shape
    phi = np.zeros((G, m), dtype=complex)
    for k in range(m):
        v = A[:, k].copy()
        for _ in range(2):
            for n in range(k):
                v -= (w * np.vdot(phi[:, n], v)) * phi[:, n]
        norm = math.sqrt(w * np.vdot(v, v).real)
        if norm < _RANK_TOL:
            raise RankDeficiencyError(
                f"steering column of element {k} is linearly dependent on elements 0..{k - 1}", k
            )
        phi[:, k] = v / norm
    projections = w * (A.T @ phi.conj())
    return BasisSet(phi, projections, w)


def pattern_from_currents(geometry: EsparGeometry, i) -> np.ndarray:
    """``P(theta_g) = i^T a(theta_g)`` on the grid."""
    i = np.asarray(i, dtype=complex)
    if i.shape != (geometry.m,):
        raise ValueError(f"current vector must have length {geometry.m}")
    return geometry.steering @ i


def basis_weights(i, basis: BasisSet) -> np.ndarray:
    """Beamspace weights ``w_n = i^T q_n``."""
    i = np.asarray(i, dtype=complex)
    if i.shape[-1] != basis.projections.shape[0]:
        raise ValueError("current vector length does not match the basis")
    return i @ basis.projections


def pattern_from_weights(w, basis: BasisSet) -> np.ndarray:
    """``P(theta_g) = sum_n w_n Phi_n(theta_g)``."""
    w = np.asarray(w, dtype=complex)
    if w.shape[-1] != basis.phi.shape[1]:
        raise ValueError("weight vector length does not match the basis")
    return basis.phi @ w
