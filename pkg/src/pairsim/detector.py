"""Statistical models of the gated InGaAs APD counter and the Si SPCM.

The APD model is data-driven: a piecewise-linear quantum-efficiency curve
over overbias voltage plus per-gate dark probability, exponential
afterpulse decay, and Gaussian click-time jitter.  Detection takes its
randomness as an explicit ``numpy.random.Generator`` so simulation shards
can own independent streams.

Per gate the generator is consumed in a fixed order regardless of
outcomes: (1) photon-efficiency uniform, (2) click-time jitter normal,
(3) dark-count uniform, (4) dark-time uniform.
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass
from importlib import resources
from math import exp

import numpy as np

from .errors import ConfigError
from .formatting import format_number, write_lines


@dataclass(frozen=True)
class AfterpulseParams:
    """Exponential trap-decay afterpulse model."""

    amplitude: float
    trap_lifetime_us: float
    temperature_scale_per_c: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.amplitude < 1.0:
            raise ConfigError(f"afterpulse amplitude must lie in [0, 1), got {self.amplitude}")
        if self.trap_lifetime_us <= 0:
            raise ConfigError(f"trap lifetime must be > 0 us, got {self.trap_lifetime_us}")


@dataclass(frozen=True)
class GatedApdModel:
    """Gated Geiger-mode APD: QE vs overbias, darks, afterpulsing, timing."""

    temperature_c: float
    qe_curve: tuple[tuple[float, float], ...]
    dark_prob_per_gate: float
    gate_length_ns: float
    afterpulse: AfterpulseParams
    deadband_ns: float = 10_000.0
    jitter_sigma_ns: float = 1.0
    edge_mask_ns: float = 3.0
    edge_mask_enabled: bool = False

    def __post_init__(self):
        if not self.qe_curve:
            raise ConfigError("APD quantum-efficiency curve has no knots")
        volts = [v for v, _ in self.qe_curve]
        effs = [e for _, e in self.qe_curve]
        if any(b <= a for a, b in zip(volts, volts[1:])):
            raise ConfigError("QE curve overbias values must be strictly increasing")
        if any(not 0.0 <= e <= 1.0 for e in effs):
            raise ConfigError("QE curve efficiencies must lie in [0, 1]")
        if any(b < a for a, b in zip(effs, effs[1:])):
            raise ConfigError("QE curve efficiencies must be nondecreasing")
        if not 0.0 <= self.dark_prob_per_gate < 1.0:
            raise ConfigError(
                f"dark probability per gate must lie in [0, 1), got {self.dark_prob_per_gate}")
        if self.gate_length_ns <= 0:
            raise ConfigError(f"gate length must be > 0 ns, got {self.gate_length_ns}")
        if self.jitter_sigma_ns < 0:
            raise ConfigError(f"jitter sigma must be >= 0 ns, got {self.jitter_sigma_ns}")

    @property
    def overbias_span(self) -> tuple[float, float]:
        return self.qe_curve[0][0], self.qe_curve[-1][0]


@dataclass(frozen=True)
class SpcmModel:
    """Free-running Si single-photon counting module."""

    efficiency: float
    dark_rate_hz: float = 100.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError(f"SPCM efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate_hz < 0:
            raise ConfigError(f"SPCM dark rate must be >= 0, got {self.dark_rate_hz}")


def qe_at_overbias(model: GatedApdModel, overbias_v: float) -> float:
    """Piecewise-linear interpolation of the QE curve, clamped at the ends
    (with a warning when clamping)."""
    lo, hi = model.overbias_span
    if overbias_v < lo or overbias_v > hi:
        warnings.warn(
            f"overbias {overbias_v:g} V outside curve span [{lo:g}, {hi:g}] V; clamping",
            stacklevel=2,
        )
    volts = np.array([v for v, _ in model.qe_curve])
    effs = np.array([e for _, e in model.qe_curve])
    return float(np.interp(overbias_v, volts, effs))


def dark_prob(model: GatedApdModel, window_ns: float) -> float:
    """Dark-count probability in a sub-window of the gate.

    Homogeneous-in-time thinning of the per-gate figure:
    1 - (1 - p_gate)^(window / gate).
    """
    if not 0 < window_ns <= model.gate_length_ns:
        raise ConfigError(
            f"window {window_ns:g} ns must lie in (0, gate length {model.gate_length_ns:g} ns]")
    return 1.0 - (1.0 - model.dark_prob_per_gate) ** (window_ns / model.gate_length_ns)


def afterpulse_prob(params: AfterpulseParams, time_since_last_avalanche_us: float,
                    degrees_below_reference: float = 0.0) -> float:
    """p0 * exp(-t/tau), scaled up for operation below the reference
    temperature (afterpulsing worsens as traps live longer when cold)."""
    if time_since_last_avalanche_us < 0:
        raise ConfigError("time since last avalanche must be >= 0")
    scale = 1.0 + params.temperature_scale_per_c * max(0.0, degrees_below_reference)
    return params.amplitude * exp(-time_since_last_avalanche_us / params.trap_lifetime_us) * scale


def _edge_factor(model: GatedApdModel, offsets_ns: np.ndarray) -> np.ndarray:
    """Linear efficiency ramp inside the gate rise/fall windows (optional)."""
    if not model.edge_mask_enabled or model.edge_mask_ns <= 0:
        return np.ones_like(offsets_ns)
    rise = np.clip(offsets_ns / model.edge_mask_ns, 0.0, 1.0)
    fall = np.clip((model.gate_length_ns - offsets_ns) / model.edge_mask_ns, 0.0, 1.0)
    return rise * fall


def effective_efficiency(model: GatedApdModel, arrival_offsets_ns,
                         overbias_v: float) -> np.ndarray:
    """Photon detection probability at the given arrival offsets: curve QE
    times the (optional) gate-edge ramp."""
    offsets = np.asarray(arrival_offsets_ns, dtype=float)
    return qe_at_overbias(model, overbias_v) * _edge_factor(model, offsets)


def detect_in_gate_batch(model: GatedApdModel, arrival_offsets_ns: np.ndarray,
                         overbias_v: float,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised per-gate detection; NaN offsets mark gates with no photon.

    Returns (clicked, click_times_ns); click times are NaN where no click
    occurred.  Earliest avalanche wins when both the photon and a dark
    count fire in the same gate.
    """
    offsets = np.asarray(arrival_offsets_ns, dtype=float)
    n = offsets.shape[0]
    gate = model.gate_length_ns

    has_photon = ~np.isnan(offsets)
    if np.any((offsets[has_photon] < 0) | (offsets[has_photon] >= gate)):
        raise ConfigError("photon arrival offsets must lie in [0, gate length)")

    u_qe = rng.random(n)
    jitter = rng.normal(0.0, 1.0, n) * model.jitter_sigma_ns
    u_dark = rng.random(n)
    t_dark = rng.random(n) * gate

    eff = np.where(has_photon,
                   effective_efficiency(model, np.nan_to_num(offsets), overbias_v),
                   0.0)
    photon_time = offsets + jitter
    photon_click = has_photon & (u_qe < eff) \
        & (photon_time >= 0.0) & (photon_time < gate)
    dark_click = u_dark < model.dark_prob_per_gate

    t_photon = np.where(photon_click, photon_time, np.inf)
    t_dark_won = np.where(dark_click, t_dark, np.inf)
    t_click = np.minimum(t_photon, t_dark_won)
    clicked = np.isfinite(t_click)
    return clicked, np.where(clicked, t_click, np.nan)


def detect_in_gate(model: GatedApdModel, arrival_offset_ns: float | None,
                   overbias_v: float,
                   rng: np.random.Generator) -> tuple[bool, float | None]:
    """Single-gate detection; see detect_in_gate_batch for the semantics."""
    offsets = np.array([np.nan if arrival_offset_ns is None else arrival_offset_ns])
    clicked, times = detect_in_gate_batch(model, offsets, overbias_v, rng)
    if clicked[0]:
        return True, float(times[0])
    return False, None


def load_apd(source: str) -> GatedApdModel:
    """Load an APD model file (path, or ``builtin:<name>`` for shipped data)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        text = resources.files("pairsim.data").joinpath(f"{name}.ini").read_text("utf-8")
        parser.read_string(text)
    else:
        if not parser.read(source):
            raise ConfigError(f"cannot read APD model file: {source}")
    try:
        apd = parser["apd"]
        ap = parser["afterpulse"]
        knots = []
        for line in parser["qe_curve"]["knots"].strip().splitlines():
            volt, eff = line.split(":")
            knots.append((float(volt), float(eff)))
        return GatedApdModel(
            temperature_c=apd.getfloat("temperature_c"),
            qe_curve=tuple(knots),
            dark_prob_per_gate=apd.getfloat("dark_prob_per_gate"),
            gate_length_ns=apd.getfloat("gate_length_ns"),
            afterpulse=AfterpulseParams(
                amplitude=ap.getfloat("amplitude"),
                trap_lifetime_us=ap.getfloat("trap_lifetime_us"),
                temperature_scale_per_c=ap.getfloat("temperature_scale_per_c", 0.0),
            ),
            deadband_ns=apd.getfloat("deadband_ns", 10_000.0),
            jitter_sigma_ns=apd.getfloat("jitter_sigma_ns", 1.0),
            edge_mask_ns=apd.getfloat("edge_mask_ns", 3.0),
            edge_mask_enabled=apd.getboolean("edge_mask_enabled", False),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed APD model file {source}: {exc}") from exc


def default_apd() -> GatedApdModel:
    return load_apd("builtin:apd_ingaas")


def write_detector_csv(model: GatedApdModel, sweep_v: list[float], path) -> None:
    """(overbias, QE, dark-per-gate, clamped) CSV over an overbias sweep."""
    lo, hi = model.overbias_span
    lines = ["overbias_v,qe,dark_prob_per_gate,clamped"]
    for v in sweep_v:
        clamped = v < lo or v > hi
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            qe = qe_at_overbias(model, v)
        lines.append(
            f"{format_number(v)},{format_number(qe)},"
            f"{format_number(model.dark_prob_per_gate)},{int(clamped)}"
        )
    write_lines(path, lines)
