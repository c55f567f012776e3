"""Named measurement scenarios: symmetry/loss/pump variants of the default sensor.

A scenario modifies the baseline parameter set only through three switches:

- ``symmetric``: removes the 1% sideband-bandwidth split and the 3% coupling
  split (``gamma_pm -> gamma0``, ``eps_pm -> 1``);
- ``lossless``: turns the loss channels off while keeping every total
  half-width fixed (the loss share of each sideband bandwidth moves to the
  input coupling, and the central input rate is untouched so the intracavity
  pump amplitude is identical with and without loss);
- ``pump_mult``: scales the input power.

The sweep presets named ``fig*`` reproduce the standard comparison plots of
``R = S_qu/S_SQL`` versus frequency; their grids extend below the default
sweep band because the sub-SQL dips and the loss floors of the baseline
sensor sit at low frequency for microwatt pumping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .params import PhysParams
from .spectra import GRID_POINTS_DEFAULT, make_grid


def variant(p: PhysParams, symmetric: bool = False, lossless: bool = False,
            pump_mult: float = 1.0) -> PhysParams:
    """Apply the three scenario switches to a parameter set."""
    if pump_mult <= 0.0:
        raise ValueError(f"pump multiplier must be > 0, got {pump_mult!r}")
    changes: dict = {}
    g0p, g0m = p.gamma0_plus, p.gamma0_minus
    gep, gem = p.gamma_e_plus, p.gamma_e_minus
    if symmetric:
        g0p = p.gamma0 - gep
        g0m = p.gamma0 - gem
        changes["eps_plus"] = 1.0
        changes["eps_minus"] = 1.0
    if lossless:
        g0p += gep
        g0m += gem
        gep = gem = 0.0
        changes["gamma_e"] = 0.0
    changes.update(
        gamma0_plus=g0p, gamma0_minus=g0m, gamma_e_plus=gep, gamma_e_minus=gem,
        p_in=pump_mult * p.p_in,
    )
    return replace(p, **changes)


@dataclass(frozen=True)
class Scenario:
    """A named sensor configuration plus the sweep grid it is plotted on.

    Grid bounds are in the scaled units ``Omega * tau / (2 pi)``;  ``None``
    keeps the default sweep band.
    """

    name: str
    symmetric: bool = False
    lossless: bool = False
    pump_mult: float = 1.0
    y_policy: object = "optimal"
    grid_kind: str = "log"
    grid_n: int = GRID_POINTS_DEFAULT
    grid_lo_scaled: float | None = None
    grid_hi_scaled: float | None = None

    def apply(self, p: PhysParams) -> PhysParams:
        return variant(p, symmetric=self.symmetric, lossless=self.lossless,
                       pump_mult=self.pump_mult)

    def grid(self, tau: float) -> np.ndarray:
        lo = None if self.grid_lo_scaled is None else 2.0 * math.pi * self.grid_lo_scaled / tau
        hi = None if self.grid_hi_scaled is None else 2.0 * math.pi * self.grid_hi_scaled / tau
        return make_grid(tau, kind=self.grid_kind, n=self.grid_n, lo=lo, hi=hi)

    def describe(self) -> str:
        bits = [
            "symmetric" if self.symmetric else "non-symmetric",
            "lossless" if self.lossless else "lossy",
            f"pump x{self.pump_mult:g}",
        ]
        return ", ".join(bits)


# Grid for the comparison figures: wide enough to show both the sub-SQL dips
# (low frequency) and the shot-noise rise up to ten signal bandwidths.
_FIG_LO = 2e-4
_FIG_HI = 10.0


def _fig(name: str, symmetric: bool, lossless: bool, pump_mult: float = 1.0) -> Scenario:
    return Scenario(
        name=name, symmetric=symmetric, lossless=lossless, pump_mult=pump_mult,
        grid_lo_scaled=_FIG_LO, grid_hi_scaled=_FIG_HI,
    )


SWEEP_SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        _fig("fig2-sym", symmetric=True, lossless=True),
        _fig("fig2-nonsym", symmetric=False, lossless=True),
        _fig("fig2-nonsym-10P", symmetric=False, lossless=True, pump_mult=10.0),
        _fig("fig3-nonsym-lossy", symmetric=False, lossless=False),
        _fig("fig3-nonsym-lossless", symmetric=False, lossless=True),
        _fig("fig3-nonsym-lossy-10P", symmetric=False, lossless=False, pump_mult=10.0),
        _fig("fig3-nonsym-lossless-10P", symmetric=False, lossless=True, pump_mult=10.0),
        _fig("fig4-sym-lossy", symmetric=True, lossless=False),
        _fig("fig4-sym-lossless", symmetric=True, lossless=True),
        _fig("fig4-sym-lossy-10P", symmetric=True, lossless=False, pump_mult=10.0),
        _fig("fig4-sym-lossless-10P", symmetric=True, lossless=True, pump_mult=10.0),
    )
}

ORACLE_SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario(name="sym-lossless", symmetric=True, lossless=True),
        Scenario(name="nonsym-lossless", symmetric=False, lossless=True),
        Scenario(name="nonsym-lossy", symmetric=False, lossless=False),
    )
}
