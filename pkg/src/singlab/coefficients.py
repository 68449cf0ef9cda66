"""Named analytic coefficient families for a(rho) and h(rho).

The glue error is a delicate difference of large terms, so a and h must come
with exact derivatives; finite-differencing them would corrupt the error
measurement.  Only radial fields are supported here (the mode solver rejects
anything else by construction).

Families:
  constant        (c,)              a = c
  poly_r2         (c0, c1, ...)     a = c0 + c1 r^2 + c2 r^4 + ...
  gaussian_bump   (c0, amp, s)      a = c0 + amp exp(-(r/s)^2)
  poly_r2_power   (c0, c1, k)       a = (c0 + c1 r^2)^k
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnalyticCoefficient:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in ("constant", "poly_r2", "gaussian_bump", "poly_r2_power"):
            raise ValueError(f"unknown coefficient family '{self.family}'")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def value(self, r):
        r = np.asarray(r, dtype=float)
        ps = self.params
        if self.family == "constant":
            return np.full_like(r, ps[0])
        if self.family == "poly_r2":
            out = np.zeros_like(r)
            for k, c in enumerate(ps):
                out += c * r ** (2 * k)
            return out
        if self.family == "gaussian_bump":
            c0, amp, s = ps
            return c0 + amp * np.exp(-(r / s) ** 2)
        c0, c1, k = ps
        return (c0 + c1 * r ** 2) ** k

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        ps = self.params
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "poly_r2":
            out = np.zeros_like(r)
            for k, c in enumerate(ps):
                if k > 0:
                    out += 2 * k * c * r ** (2 * k - 1)
            return out
        if self.family == "gaussian_bump":
            c0, amp, s = ps
            return amp * (-2.0 * r / s ** 2) * np.exp(-(r / s) ** 2)
        c0, c1, k = ps
        return k * (c0 + c1 * r ** 2) ** (k - 1) * 2.0 * c1 * r

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        ps = self.params
        if self.family == "constant":
            return np.zeros_like(r)
        if self.family == "poly_r2":
            out = np.zeros_like(r)
            for k, c in enumerate(ps):
                if k > 0:
                    out += 2 * k * (2 * k - 1) * c * r ** (2 * k - 2)
            return out
        if self.family == "gaussian_bump":
            c0, amp, s = ps
            return amp * (-2.0 / s ** 2 + 4.0 * r ** 2 / s ** 4) * np.exp(-(r / s) ** 2)
        c0, c1, k = ps
        base = c0 + c1 * r ** 2
        return (k * (k - 1) * base ** (k - 2) * (2.0 * c1 * r) ** 2
                + k * base ** (k - 1) * 2.0 * c1)

    def min_on(self, r_max, samples=2001):
        r = np.linspace(0.0, r_max, samples)
        return float(np.min(self.value(r)))


def constant(c):
    return AnalyticCoefficient("constant", (c,))


def poly_r2(*coeffs):
    return AnalyticCoefficient("poly_r2", tuple(coeffs))


def gaussian_bump(c0, amp, s):
    return AnalyticCoefficient("gaussian_bump", (c0, amp, s))


def poly_r2_power(c0, c1, k):
    return AnalyticCoefficient("poly_r2_power", (c0, c1, k))


@dataclass(frozen=True)
class CoefficientField:
    """The pair (a, h) of Eq-style coefficients: -div(a grad u) + a h u = a u^p."""

    a: AnalyticCoefficient
    h: AnalyticCoefficient

    def validate(self, R):
        if self.a.min_on(R) <= 0.0:
            raise ValueError("coefficient a must be strictly positive on [0, R]")
        return True


def unit_field():
    """a = 1, h = 0: the pure Laplacian diagnostic configuration."""
    return CoefficientField(a=constant(1.0), h=constant(0.0))
