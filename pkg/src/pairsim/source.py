"""Rate, brightness and efficiency-budget arithmetic for the pair source.

Everything here is exact bookkeeping on measured figures: efficiencies are
dimensionless fractions, rates are per second per mW of pump, bandwidths in
GHz.  Percent formatting belongs to the presentation layer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import pi, sin

from .errors import ConfigError
from .formatting import format_number, write_lines

# Intrinsic d33 of lithium niobate (pm/V, 1.06-um reference).
DEFAULT_D33_PM_PER_V = 25.2


@dataclass(frozen=True)
class LossChain:
    """Ordered named efficiency stages whose product is the chain efficiency."""

    stages: tuple[tuple[str, float], ...]

    def __post_init__(self):
        names = [name for name, _ in self.stages]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate stage names in loss chain: {names}")
        for name, eff in self.stages:
            if not 0.0 <= eff <= 1.0:
                raise ConfigError(f"stage '{name}' efficiency must lie in [0, 1], got {eff}")

    def get(self, name: str) -> float | None:
        for stage_name, eff in self.stages:
            if stage_name == name:
                return eff
        return None

    def prepend(self, name: str, efficiency: float) -> "LossChain":
        return LossChain(stages=((name, efficiency),) + self.stages)


@dataclass(frozen=True)
class RateFigures:
    """Pair rate, bandwidth, and the spectral brightness they imply.

    Brightness is derived from the other two when omitted; when supplied
    it must be consistent with them.
    """

    pair_rate_per_mw: float
    bandwidth_ghz: float
    spectral_brightness: float | None = None

    def __post_init__(self):
        if self.pair_rate_per_mw < 0 or self.bandwidth_ghz < 0:
            raise ConfigError("rate figures must be nonnegative")
        if self.spectral_brightness is None:
            if self.bandwidth_ghz <= 0:
                raise ConfigError("cannot derive brightness without a positive bandwidth")
            object.__setattr__(self, "spectral_brightness",
                               self.pair_rate_per_mw / self.bandwidth_ghz)
            return
        if self.spectral_brightness < 0:
            raise ConfigError("rate figures must be nonnegative")
        if self.bandwidth_ghz > 0:
            implied = self.pair_rate_per_mw / self.bandwidth_ghz
            if abs(self.spectral_brightness - implied) > 1e-9 * max(implied, 1.0):
                raise ConfigError(
                    f"spectral brightness {self.spectral_brightness:g} inconsistent "
                    f"with rate/bandwidth ({implied:g})")


def chain_efficiency(chain: LossChain) -> float:
    """Product of all stage efficiencies (1.0 for an empty chain)."""
    eff = 1.0
    for _, stage_eff in chain.stages:
        eff *= stage_eff
    return eff


def infer_generation_rate(detected_rate_per_mw: float, chain: LossChain) -> float:
    """Back out the generated rate from a detected rate and its loss chain."""
    eff = chain_efficiency(chain)
    if eff == 0.0:
        raise ConfigError("cannot infer a generation rate through a zero-efficiency chain")
    return detected_rate_per_mw / eff


def spectral_brightness(pair_rate_per_mw: float, bandwidth_ghz: float) -> float:
    """Pairs per second per GHz per mW."""
    if bandwidth_ghz <= 0:
        raise ConfigError(f"bandwidth must be > 0 GHz, got {bandwidth_ghz}")
    return pair_rate_per_mw / bandwidth_ghz


def mode_matching_ratio(coupling_and_matching: float, fiber_coupling: float) -> float:
    """Split the combined coupling+matching figure by the probe-laser fiber
    coupling to isolate the signal-idler mode matching."""
    if fiber_coupling <= 0:
        raise ConfigError(f"fiber coupling must be > 0, got {fiber_coupling}")
    ratio = coupling_and_matching / fiber_coupling
    if ratio > 1.0:
        warnings.warn(
            f"mode-matching ratio {ratio:.3g} exceeds 1; the combined figure is "
            "inconsistent with the stated fiber coupling",
            stacklevel=2,
        )
    return ratio


def d_eff_qpm(order: int, duty_cycle: float,
              d33_pm_per_v: float = DEFAULT_D33_PM_PER_V) -> float:
    """Ideal grating Fourier amplitude |(2/(m*pi)) * sin(m*pi*D)| times d33."""
    if order < 1 or order % 2 == 0:
        raise ConfigError(
            f"QPM order must be a positive odd integer, got {order} "
            "(even orders vanish at 50% duty cycle)"
        )
    if not 0 < duty_cycle < 1:
        raise ConfigError(f"duty cycle must lie in (0, 1), got {duty_cycle}")
    return abs(2.0 / (order * pi) * sin(order * pi * duty_cycle)) * d33_pm_per_v


def budget_rows(chain: LossChain) -> list[tuple[str, float, float]]:
    """(name, efficiency, cumulative product) per stage."""
    rows = []
    running = 1.0
    for name, eff in chain.stages:
        running *= eff
        rows.append((name, eff, running))
    return rows


def render_budget_text(chain: LossChain) -> list[str]:
    """Plain-text budget table with a cumulative column."""
    lines = [f"{'stage':<24}{'efficiency':>12}{'cumulative':>12}"]
    for name, eff, cum in budget_rows(chain):
        lines.append(f"{name:<24}{eff:>12.4f}{cum:>12.4f}")
    lines.append(f"{'total':<24}{'':>12}{chain_efficiency(chain):>12.4f}")
    return lines


def write_budget_csv(chain: LossChain, path) -> None:
    lines = ["stage,efficiency,cumulative"]
    for name, eff, cum in budget_rows(chain):
        lines.append(f"{name},{format_number(eff)},{format_number(cum)}")
    write_lines(path, lines)
