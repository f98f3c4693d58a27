"""Run configuration: one INI file with a section per subsystem, from which
all model objects are built.  Command-line flags override file values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources

from .detector import GatedApdModel, SpcmModel, load_apd
from .dispersion import SellmeierModel, load_sellmeier
from .errors import ConfigError
from .montecarlo import ExperimentConfig
from .qpm import CrystalSpec
from .source import LossChain

DEFAULT_CONFIG = "builtin:reference_setup"


@dataclass(frozen=True)
class BudgetInputs:
    """Measured rate figures consumed by the budget report.

    The free-space (multimode) rate and the detected single-mode rate are
    independent inputs by design; the two are never derived from each other.
    """

    detected_signal_rate_per_mw: float
    freespace_pair_rate_per_mw: float
    signal_bandwidth_ghz: float


@dataclass(frozen=True)
class RunConfig:
    sellmeier: SellmeierModel
    crystal: CrystalSpec
    pump_wavelength_nm: float
    temperature_c: float
    signal_bracket_nm: tuple[float, float]
    apd: GatedApdModel
    overbias_v: float
    spcm: SpcmModel
    experiment: ExperimentConfig
    budget: BudgetInputs
    seed: int | None
    out_dir: str


def _parse_chain(text: str) -> LossChain:
    """Parse 'name: eff, name: eff' into a LossChain."""
    stages = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, value = item.partition(":")
        if not value:
            raise ConfigError(f"bad loss-chain stage '{item}' (want 'name: efficiency')")
        stages.append((name.strip(), float(value)))
    return LossChain(stages=tuple(stages))


def _parse_reflectivity(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        band, _, value = item.partition(":")
        out[band.strip()] = float(value)
    return out


def _parse_pair(text: str) -> tuple[float, float]:
    parts = [float(tok) for tok in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected two comma-separated numbers, got '{text}'")
    return parts[0], parts[1]


def load_run_config(source: str = DEFAULT_CONFIG) -> RunConfig:
    """Load a run configuration (path, or ``builtin:<name>`` for shipped data)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        text = resources.files("pairsim.data").joinpath(f"{name}.ini").read_text("utf-8")
        parser.read_string(text)
    else:
        if not parser.read(source):
            raise ConfigError(f"cannot read config file: {source}")

    try:
        run = parser["run"]
        crystal_sec = parser["crystal"]
        qpm_sec = parser["qpm"]
        apd_sec = parser["apd"]
        spcm_sec = parser["spcm"]
        exp = parser["experiment"]
        budget_sec = parser["budget"]

        sellmeier = load_sellmeier(parser["dispersion"]["model_file"])
        crystal = CrystalSpec(
            length_mm=crystal_sec.getfloat("length_mm"),
            poling_period_um=crystal_sec.getfloat("poling_period_um"),
            qpm_order=crystal_sec.getint("qpm_order"),
            duty_cycle=crystal_sec.getfloat("duty_cycle"),
            thermal_expansion_per_c=crystal_sec.getfloat("thermal_expansion_per_c"),
            reference_temp_c=crystal_sec.getfloat("reference_temp_c"),
            facet_reflectivity=_parse_reflectivity(crystal_sec.get("facet_reflectivity", "")),
        )
        n_triggers = exp.getint("n_triggers") if exp.get("n_triggers") else None
        duration_s = exp.getfloat("duration_s") if exp.get("duration_s") else None
        experiment = ExperimentConfig(
            pump_power_mw=exp.getfloat("pump_power_mw"),
            singlemode_pair_rate_per_mw=exp.getfloat("singlemode_pair_rate_per_mw"),
            signal_chain=_parse_chain(exp["signal_chain"]),
            idler_chain=_parse_chain(exp["idler_chain"]),
            fiber_delay_ns=exp.getfloat("fiber_delay_ns", 345.0),
            gate_open_lead_ns=exp.getfloat("gate_open_lead_ns", 8.0),
            max_trigger_rate_hz=exp.getfloat("max_trigger_rate_hz", 1.0e4),
            bin_width_ns=exp.getfloat("bin_width_ns", 2.0),
            window_ns=exp.getfloat("window_ns", 20.0),
            n_triggers=n_triggers,
            duration_s=duration_s,
            pump_waist_um=exp.getfloat("pump_waist_um", 90.0),
        )
        budget = BudgetInputs(
            detected_signal_rate_per_mw=budget_sec.getfloat("detected_signal_rate_per_mw"),
            freespace_pair_rate_per_mw=budget_sec.getfloat("freespace_pair_rate_per_mw"),
            signal_bandwidth_ghz=budget_sec.getfloat("signal_bandwidth_ghz"),
        )
        return RunConfig(
            sellmeier=sellmeier,
            crystal=crystal,
            pump_wavelength_nm=qpm_sec.getfloat("pump_wavelength_nm"),
            temperature_c=qpm_sec.getfloat("temperature_c"),
            signal_bracket_nm=_parse_pair(qpm_sec.get("signal_bracket_nm", "760, 860")),
            apd=load_apd(apd_sec["model_file"]),
            overbias_v=apd_sec.getfloat("overbias_v"),
            spcm=SpcmModel(
                efficiency=spcm_sec.getfloat("efficiency"),
                dark_rate_hz=spcm_sec.getfloat("dark_rate_hz", 100.0),
            ),
            experiment=experiment,
            budget=budget,
            seed=run.getint("seed") if run.get("seed") else None,
            out_dir=run.get("out_dir", "out"),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed run config {source}: {exc}") from exc
