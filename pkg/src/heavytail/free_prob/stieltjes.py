"""Karamata-type asymptotics of Stieltjes-like integrals of regularly varying measures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .._common import HeavyTailDomainError, IntegrationError, RatioReport


def karamata_constant(alpha: float) -> float:
    """(pi alpha/2) / sin(pi alpha/2), equal to 1 at alpha = 0."""
    if not 0.0 <= alpha < 2.0:
        raise HeavyTailDomainError("alpha must lie in [0, 2)")
    if alpha == 0.0:
        return 1.0
    h = 0.5 * math.pi * alpha
    return h / math.sin(h)


@dataclass
class LebesgueMeasure:
    """Lebesgue measure on [0, upper]."""

    upper: float = math.inf

    def mass_below(self, y):
        return np.minimum(y, self.upper)

    def mass_above(self, y):
        return np.maximum(self.upper - y, 0.0)

    def inverse_square(self, y):
        # int_0^upper dt / (t^2 + y^2)
        return np.arctan(self.upper / y) / y

    def damped_mass(self, y):
        # int_0^upper t^2 / (t^2 + y^2) dt
        if math.isinf(self.upper):
            return np.full(np.shape(y), math.inf)
        return self.upper - y * np.arctan(self.upper / y)


@dataclass
class DensityMeasure:
    """Measure with a density on [left, inf); survival and distribution function supplied."""

    density: callable
    survival: callable
    left: float = 0.0
    total: float = 1.0

    def mass_below(self, y):
        return self.total - self.survival(np.asarray(y, dtype=float))

    def mass_above(self, y):
        return self.survival(np.asarray(y, dtype=float))

    def _integral(self, kernel, y):
        out = []
        for yy in np.atleast_1d(y):
            pieces = []
            a = self.left
            for b in sorted({max(a, 0.5 * yy), max(a, yy), max(a, 2.0 * yy)}):
                if b > a:
                    pieces.append((a, b))
                    a = b
            total = 0.0
            for a0, b0 in pieces:
                val, _ = integrate.quad(lambda t: kernel(t, yy) * self.density(t), a0, b0,
                                        limit=200, epsabs=0.0, epsrel=1e-12)
                total += val
            # beyond the last break point, substitute t = a/u to map onto (0, 1]
            tail, _ = integrate.quad(
                lambda u: kernel(a / u, yy) * self.density(a / u) * a / (u * u) if u > 0 else 0.0,
                0.0, 1.0, limit=200, epsabs=0.0, epsrel=1e-12)
            total += tail
            if not math.isfinite(total):
                raise IntegrationError("Stieltjes integral diverged")
            out.append(total)
        return np.asarray(out)

    def inverse_square(self, y):
        return self._integral(lambda t, yy: 1.0 / (t * t + yy * yy), y)

    def damped_mass(self, y):
        return self._integral(lambda t, yy: t * t / (t * t + yy * yy), y)


def measure_from_model(model) -> DensityMeasure:
    """Wrap a tail model (density, survival, left end) as a Stieltjes measure."""
    return DensityMeasure(density=lambda t: float(model.density(t)),
                          survival=model.survival, left=max(model.left_end, 0.0))


def stieltjes_karamata(rho, alpha: float, y_grid, which: str = "prop51") -> RatioReport:
    """Ratio of a Stieltjes-type integral to its Karamata equivalent.

    prop51: int drho/(t^2+y^2) divided by c_alpha rho[0,y] / y^2
    prop52: int t^2/(t^2+y^2) drho divided by c_alpha rho(y, inf)

    with c_alpha = (pi alpha/2)/sin(pi alpha/2). Both ratios tend to one
    when rho[0, y] is regularly varying of index alpha (prop51) or
    rho(y, inf) of index -alpha (prop52).
    """
    y = np.asarray(y_grid, dtype=float)
    c = karamata_constant(alpha)
    if which == "prop51":
        value = rho.inverse_square(y) / (c * rho.mass_below(y) / y ** 2)
    elif which == "prop52":
        if isinstance(rho, LebesgueMeasure) and math.isinf(rho.upper):
            raise HeavyTailDomainError("prop52 needs a finite measure")
        value = rho.damped_mass(y) / (c * rho.mass_above(y))
    else:
        raise HeavyTailDomainError(f"unknown variant {which!r}")
    return RatioReport(x=y, value=value, target=1.0, label=which, meta={"alpha": alpha, "c_alpha": c})
