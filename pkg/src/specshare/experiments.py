"""Configuration-driven experiments producing deterministic CSV tables.

Every experiment derives its random streams from the configured seed
through fixed child indices, so a scenario's samples do not depend on
which other scenarios or grid points are requested. Within one scenario
the same channel sample set is reused across all Q_av and rho values.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import capacity_from_states
from .channels import SCENARIOS, FadingSpec, ScenarioSpec, sample_gain, sample_state
from .exceptions import ConfigError, SolverError
from .power import ConstraintSet, fit_lambda
from .rap import (
    equivalent_gain,
    frozen_phase_profiles,
    ks_rayleigh,
    rap_link_step,
    random_tx_weights,
    sample_basis_channels,
)
from .numerics import RngStream

__all__ = [
    "ExperimentConfig",
    "Table",
    "db_to_linear",
    "linear_to_db",
    "load_config",
    "parse_config",
    "run_capacity_sweep",
    "sweep_policies",
    "run_pdf_experiment",
    "run_timeseries",
    "run_basis_sweep",
    "write_table",
    "gnuplot_script",
]

# child-stream offsets, one block per experiment
_CAPACITY_STREAM = 1000
_PDF_STREAM = 2000
_TIMESERIES_STREAM = 3000
_BASIS_STREAM = 4000


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def _q_grid_default():
    return tuple(float(x) for x in range(-5, 16, 2))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters shared by all experiments.

    Defaults reproduce the numerical-results setting: unit mean powers on
    all links, PU power 1 dB, K = 10 dB on Rician links and 1e5 samples.
    ``k_factor_db`` and ``mean_powers_db`` are ordered (s, sp, ps).
    """

    scenarios: tuple = SCENARIOS
    q_av_db: tuple = field(default_factory=_q_grid_default)
    rho: tuple = (1.2, math.inf)
    k_factor_db: tuple = (10.0, 10.0, 10.0)
    mean_powers_db: tuple = (0.0, 0.0, 0.0)
    pu_power_db: float = 1.0
    n_samples: int = 100_000
    seed: int = 1
    m_grid: tuple = (1, 2, 3, 5, 8)
    output_path: str | None = None
    duration: int = 1000
    timeseries_m: int = 5
    pdf_bins: int = 50
    basis_scenarios: tuple = ("rician-rayleigh", "rician-rician", "rayleigh-rayleigh")
    basis_q_av_db: float = 5.0
    basis_rho: float = math.inf

    def __post_init__(self):
        bad = [s for s in (*self.scenarios, *self.basis_scenarios) if s not in SCENARIOS]
        if bad:
            raise ConfigError(f"unknown scenarios {bad}; expected labels from {SCENARIOS}")
        if any(r <= 1 for r in (*self.rho, self.basis_rho)):
            raise ConfigError("rho must exceed 1 (peak limit above the average limit)")
        if len(self.k_factor_db) != 3 or len(self.mean_powers_db) != 3:
            raise ConfigError("k_factor_db and mean_powers_db need 1 or 3 values")
        if self.n_samples < 10_000:
            raise ConfigError("n_samples must be at least 10000")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.m_grid or min(self.m_grid) < 1:
            raise ConfigError("m_grid must hold positive pattern counts")
        if self.duration < 100:
            raise ConfigError("duration must be at least 100 instants")
        if self.pdf_bins < 1 or self.timeseries_m < 1:
            raise ConfigError("pdf_bins and timeseries_m must be positive")

    @property
    def k_linear(self):
        return tuple(float(k) for k in db_to_linear(self.k_factor_db))

    @property
    def mean_powers(self):
        return tuple(float(g) for g in db_to_linear(self.mean_powers_db))

    @property
    def pu_power(self):
        return float(db_to_linear(self.pu_power_db))

    def scenario(self, label) -> ScenarioSpec:
        g_s, g_sp, g_ps = self.mean_powers
        return ScenarioSpec.named(label, self.k_linear, g_s, g_sp, g_ps, self.pu_power)

    def canonical(self) -> str:
        """Stable text form used for the config hash (output path excluded)."""
        items = dataclasses.asdict(self)
        items.pop("output_path")
        return "\n".join(f"{k}={_format_value(items[k])}" for k in sorted(items))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _format_value(v):
    if isinstance(v, (tuple, list)):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


# --- config file -----------------------------------------------------------

_FLOAT_LISTS = {"q_av_db", "rho", "k_factor_db", "mean_powers_db"}
_INT_LISTS = {"m_grid"}
_STR_LISTS = {"scenarios", "basis_scenarios"}
_FLOATS = {"pu_power_db", "basis_q_av_db", "basis_rho"}
_INTS = {"n_samples", "seed", "duration", "timeseries_m", "pdf_bins"}
_STRS = {"output_path"}


def _parse_float_list(key, value):
    value = value.strip()
    if ":" in value:
        try:
            start, stop, step = (float(p) for p in value.split(":"))
        except ValueError:
            raise ConfigError(f"{key}: range must be 'start:stop:step'") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"{key}: empty range {value!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    try:
        out = tuple(float(p) for p in value.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {value!r}") from None
    if not out:
        raise ConfigError(f"{key}: empty list")
    return out


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse flat ``key = value`` text; ``#`` starts a comment.

    List values are comma separated; ``q_av_db`` also accepts
    ``start:stop:step`` (inclusive). A single value for ``k_factor_db``
    or ``mean_powers_db`` applies to all three links. Keyword overrides
    win over the file.
    """
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _FLOAT_LISTS:
                parsed = _parse_float_list(key, value)
                if key in ("k_factor_db", "mean_powers_db") and len(parsed) == 1:
                    parsed = parsed * 3
            elif key in _INT_LISTS:
                parsed = tuple(int(p) for p in value.split(",") if p.strip())
            elif key in _STR_LISTS:
                parsed = tuple(p.strip() for p in value.split(",") if p.strip())
            elif key in _FLOATS:
                parsed = float(value)
            elif key in _INTS:
                parsed = int(value)
            else:
                parsed = value
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None
        values[key] = parsed
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)


# --- tables ----------------------------------------------------------------


@dataclass
class Table:
    columns: tuple
    rows: list
    config: ExperimentConfig
    experiment: str

    @property
    def failures(self):
        if "status" not in self.columns:
            return []
        i = self.columns.index("status")
        return [r for r in self.rows if str(r[i]).startswith("solver_error")]

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(
            f"# experiment={self.experiment} config_hash={self.config.digest()} "
            f"seed={self.config.seed} specshare={__version__}\n"
        )
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def write_table(table: Table, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(table.to_csv().encode())
    return path


def _rho_key(rho):
    return (math.isinf(rho), rho)


def sweep_policies(config: ExperimentConfig):
    """Fit every (scenario, rho, Q_av) point of the capacity sweep.

    Yields ``(label, rho, q_av_db, states, policy_or_error)`` in output row
    order; ``states`` is the scenario's common sample set.
    """
    root = RngStream(config.seed)
    for label in sorted(config.scenarios):
        scenario = config.scenario(label)
        stream = root.child(_CAPACITY_STREAM + SCENARIOS.index(label))
        states = sample_state(scenario, stream, config.n_samples)
        for rho in sorted(config.rho, key=_rho_key):
            for q_db in sorted(config.q_av_db):
                q = float(db_to_linear(q_db))
                constraints = ConstraintSet.from_rho(q, rho, scenario.pu_power)
                try:
                    policy = fit_lambda(states, constraints)
                except SolverError as exc:
                    policy = exc
                yield label, rho, q_db, states, policy


def run_capacity_sweep(config: ExperimentConfig) -> Table:
    """Capacity versus Q_av for each scenario and peak-to-average ratio."""
    rows = []
    for label, rho, q_db, states, policy in sweep_policies(config):
        if isinstance(policy, SolverError):
            rows.append((q_db, label, rho, math.nan, math.nan, f"solver_error: {policy}"))
            continue
        res = capacity_from_states(states, policy)
        status = "slack" if policy.slack else "ok"
        rows.append((q_db, label, rho, res.bits_per_hz, res.std_error, status))
    columns = ("q_av_db", "scenario", "rho", "capacity_bps_hz", "std_error", "status")
    return Table(columns, rows, config, "capacity-sweep")


def _interference_spec(config):
    _, k_sp, _ = config.k_linear
    _, g_sp, _ = config.mean_powers
    return FadingSpec.rician(k_sp, g_sp) if k_sp > 0 else FadingSpec.rayleigh(g_sp)


def _rap_amplitudes(spec, m, root, base, n):
    profile = frozen_phase_profiles(m, 1, root.child(base + 200 + m)).sp
    weights = random_tx_weights(m, root.child(base + 300 + m), n)
    channels = sample_basis_channels(m, spec, profile, root.child(base + 400 + m), n)
    return np.abs(equivalent_gain(weights, channels))


def run_pdf_experiment(config: ExperimentConfig) -> Table:
    """Amplitude histograms of an interference link without and with RAP.

    Bins span ``[0, 3 sqrt(gbar)]``; densities are normalised by the
    total sample count. Two summary rows per M carry the KS statistic
    and p-value against the Rayleigh law of equal mean power.
    """
    root = RngStream(config.seed)
    spec = _interference_spec(config)
    n = config.n_samples
    before = np.abs(sample_gain(spec, root.child(_PDF_STREAM), n))
    edges = np.linspace(0.0, 3.0 * math.sqrt(spec.mean_power), config.pdf_bins + 1)
    width = edges[1] - edges[0]
    centres = 0.5 * (edges[:-1] + edges[1:])
    dens_before = np.histogram(before, edges)[0] / (n * width)
    ks_before = ks_rayleigh(before, spec.mean_power)
    rows = []
    for m in sorted(set(config.m_grid)):
        after = _rap_amplitudes(spec, m, root, _PDF_STREAM, n)
        dens_after = np.histogram(after, edges)[0] / (n * width)
        rows.extend((m, c, b, a) for c, b, a in zip(centres, dens_before, dens_after))
        ks_after = ks_rayleigh(after, spec.mean_power)
        rows.append((m, "ks_statistic", ks_before[0], ks_after[0]))
        rows.append((m, "ks_p_value", ks_before[1], ks_after[1]))
    return Table(("m", "amplitude_bin", "density_before", "density_after"), rows, config, "rap-pdf")


def run_timeseries(config: ExperimentConfig) -> Table:
    """Interference amplitude over time without and with RAP.

    Summary rows ``deep_fades`` (instants below ``0.1 sqrt(gbar)``) and
    ``variance`` follow the trajectory.
    """
    root = RngStream(config.seed)
    spec = _interference_spec(config)
    n = config.duration
    before = np.abs(sample_gain(spec, root.child(_TIMESERIES_STREAM), n))
    after = _rap_amplitudes(spec, config.timeseries_m, root, _TIMESERIES_STREAM, n)
    rows = [(k, b, a) for k, (b, a) in enumerate(zip(before, after))]
    threshold = 0.1 * math.sqrt(spec.mean_power)
    rows.append(("deep_fades", int(np.sum(before < threshold)), int(np.sum(after < threshold))))
    rows.append(("variance", float(np.var(before, ddof=1)), float(np.var(after, ddof=1))))
    return Table(("k", "amplitude_before", "amplitude_after"), rows, config, "rap-timeseries")


def run_basis_sweep(config: ExperimentConfig) -> Table:
    """Capacity versus the number of basis patterns with RAP at both SU ends.

    Smart receive patterns are used whenever the SU link is Rician.
    ``m = 1`` is the single-antenna baseline.
    """
    root = RngStream(config.seed)
    q = float(db_to_linear(config.basis_q_av_db))
    rows = []
    for label in sorted(config.basis_scenarios):
        scenario = config.scenario(label)
        smart = not (scenario.su_link.is_rayleigh)
        sid = _BASIS_STREAM + 10 * SCENARIOS.index(label)
        constraints = ConstraintSet.from_rho(q, config.basis_rho, scenario.pu_power)
        for m in sorted(set(config.m_grid)):
            profiles = frozen_phase_profiles(m, m, root.child(sid + 100 * m + 1))
            link = rap_link_step(scenario, m, m, smart, profiles, root.child(sid + 100 * m + 2), config.n_samples)
            states = link.state()
            try:
                policy = fit_lambda(states, constraints)
            except SolverError as exc:
                rows.append((m, label, smart, math.nan, math.nan, f"solver_error: {exc}"))
                continue
            res = capacity_from_states(states, policy)
            rows.append((m, label, smart, res.bits_per_hz, res.std_error, "slack" if policy.slack else "ok"))
    columns = ("m", "scenario", "smart_rx", "capacity_bps_hz", "std_error", "status")
    return Table(columns, rows, config, "basis-sweep")


_GNUPLOT = {
    "capacity-sweep": (
        "set xlabel 'Q_{av} (dB)'\nset ylabel 'capacity (bps/Hz)'\n"
        "plot for [s in 'awgn rayleigh-rayleigh rayleigh-rician rician-rayleigh rician-rician'] "
        "'{csv}' using 1:($2 eq s ? $4 : 1/0) with linespoints title s\n"
    ),
    "rap-pdf": (
        "set xlabel 'amplitude'\nset ylabel 'pdf'\n"
        "plot '{csv}' using 2:($2+0 == $2 ? $3 : 1/0) with lines title 'before', "
        "'{csv}' using 2:($2+0 == $2 ? $4 : 1/0) with lines title 'after'\n"
    ),
    "rap-timeseries": (
        "set xlabel 'instant k'\nset ylabel '|h|'\n"
        "plot '{csv}' using 1:2 with lines title 'before', '{csv}' using 1:3 with lines title 'after'\n"
    ),
    "basis-sweep": (
        "set xlabel 'number of basis patterns'\nset ylabel 'capacity (bps/Hz)'\n"
        "plot for [s in 'rayleigh-rayleigh rician-rayleigh rician-rician'] "
        "'{csv}' using 1:($2 eq s ? $4 : 1/0) with linespoints title s\n"
    ),
}


def gnuplot_script(table: Table, csv_path) -> str:
    """Companion gnuplot script for a written table."""
    name = Path(csv_path).name
    return (
        "set datafile separator ','\nset key autotitle columnhead\n"
        + _GNUPLOT[table.experiment].replace("{csv}", name)
    )
