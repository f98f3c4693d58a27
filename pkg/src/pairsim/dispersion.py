"""Temperature-dependent refractive index of congruent LiNbO3 and simple
group-delay bookkeeping for fiber delay lines.

The shipped model is the extraordinary-index Sellmeier fit of Jundt
(Opt. Lett. 22, 1553 (1997)), valid for 0.40-5.00 um and 20-250 degC.
Coefficients live in ``data/lithium_niobate_e.ini`` so an alternate fit
of the same functional form can be swapped in without touching code.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from math import sqrt

from .errors import ConfigError, ValidityRangeError

C_M_PER_S = 299_792_458.0

# Reference temperatures of the thermal term f = (T - T_A)(T + T_B).
_F_T_A = 24.5
_F_T_B = 570.82

# Relative step (in lambda) for the central finite difference.
DEFAULT_FD_RELATIVE_STEP = 1e-4


@dataclass(frozen=True)
class SellmeierModel:
    """A named coefficient set for the thermal Sellmeier form above.

    ``coefficients`` is (a1..a6, b1..b4); wavelengths in um,
    temperatures in degC.
    """

    name: str
    coefficients: tuple[float, ...]
    wavelength_range_um: tuple[float, float]
    temperature_range_c: tuple[float, float]
    version: int = 1

    def __post_init__(self):
        if len(self.coefficients) != 10:
            raise ConfigError(
                f"model '{self.name}': expected 10 coefficients (a1..a6, b1..b4), "
                f"got {len(self.coefficients)}"
            )
        lo, hi = self.wavelength_range_um
        if not 0 < lo < hi:
            raise ConfigError(f"model '{self.name}': bad wavelength range {lo}..{hi} um")
        tlo, thi = self.temperature_range_c
        if not tlo < thi:
            raise ConfigError(f"model '{self.name}': bad temperature range {tlo}..{thi} C")


# Standard single-mode fiber near 1.55 um.
DEFAULT_FIBER_GROUP_INDEX = 1.468


@dataclass(frozen=True)
class DelayMedium:
    """A dispersionless delay line: group index and physical length."""

    length_m: float
    group_index: float = DEFAULT_FIBER_GROUP_INDEX

    def __post_init__(self):
        if self.group_index < 1.0:
            raise ConfigError(f"group_index must be >= 1, got {self.group_index}")
        if self.length_m < 0.0:
            raise ConfigError(f"length must be >= 0 m, got {self.length_m}")


def _check_range(model: SellmeierModel, wavelength_um: float, temperature_c: float):
    lo, hi = model.wavelength_range_um
    if not lo <= wavelength_um <= hi:
        raise ValidityRangeError(
            f"wavelength {wavelength_um:g} um outside model '{model.name}' "
            f"validity [{lo:g}, {hi:g}] um"
        )
    tlo, thi = model.temperature_range_c
    if not tlo <= temperature_c <= thi:
        raise ValidityRangeError(
            f"temperature {temperature_c:g} C outside model '{model.name}' "
            f"validity [{tlo:g}, {thi:g}] C"
        )


def refractive_index(model: SellmeierModel, wavelength_um: float,
                     temperature_c: float) -> float:
    """Extraordinary refractive index n_e(lambda, T). Pure function."""
    _check_range(model, wavelength_um, temperature_c)
    a1, a2, a3, a4, a5, a6, b1, b2, b3, b4 = model.coefficients
    f = (temperature_c - _F_T_A) * (temperature_c + _F_T_B)
    lam2 = wavelength_um * wavelength_um
    n2 = (a1 + b1 * f
          + (a2 + b2 * f) / (lam2 - (a3 + b3 * f) ** 2)
          + (a4 + b4 * f) / (lam2 - a5 * a5)
          - a6 * lam2)
    return sqrt(n2)


def dn_dwavelength(model: SellmeierModel, wavelength_um: float, temperature_c: float,
                   relative_step: float = DEFAULT_FD_RELATIVE_STEP) -> float:
    """d n / d lambda in 1/um by central finite difference.

    The stencil points must stay inside the model's wavelength range.
    """
    h = relative_step * wavelength_um
    n_hi = refractive_index(model, wavelength_um + h, temperature_c)
    n_lo = refractive_index(model, wavelength_um - h, temperature_c)
    return (n_hi - n_lo) / (2.0 * h)


def group_delay(medium: DelayMedium) -> float:
    """Propagation delay in seconds: length * group_index / c."""
    return medium.length_m * medium.group_index / C_M_PER_S


def load_sellmeier(source: str) -> SellmeierModel:
    """Load a coefficient file.

    ``source`` is a filesystem path, or ``builtin:<name>`` for a file
    shipped under ``pairsim/data`` (e.g. ``builtin:lithium_niobate_e``).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        text = resources.files("pairsim.data").joinpath(f"{name}.ini").read_text("utf-8")
        parser.read_string(text)
    else:
        if not parser.read(source):
            raise ConfigError(f"cannot read Sellmeier file: {source}")
    try:
        sec = parser["model"]
        coeffs = tuple(float(tok) for tok in sec["coefficients"].replace("\n", " ").split(","))
        wlo, whi = (float(tok) for tok in sec["wavelength_range_um"].split(","))
        tlo, thi = (float(tok) for tok in sec["temperature_range_c"].split(","))
        return SellmeierModel(
            name=sec["name"],
            coefficients=coeffs,
            wavelength_range_um=(wlo, whi),
            temperature_range_c=(tlo, thi),
            version=int(sec.get("version", "1")),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed Sellmeier file {source}: {exc}") from exc


@lru_cache(maxsize=None)
def default_model() -> SellmeierModel:
    """The shipped congruent-LiNbO3 extraordinary-index model."""
    return load_sellmeier("builtin:lithium_niobate_e")
