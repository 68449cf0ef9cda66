"""Approximate solution, glue error term, and the quadratic remainder.

The approximate solution is ubar_eps = chi * u_eps with a smooth radial
cutoff chi (1 inside sigma/2, 0 outside sigma).  Its defect under
-div(a grad .) + a h . - a |.|^p is assembled *analytically* from the cutoff
expansion

    f_eps = a [ (chi'' + (N-1) chi'/rho) u_eps + 2 chi' u_eps'
                + (chi^p - chi) u_eps^p ]
            + (chi' u_eps + chi u_eps') a'  -  a h chi u_eps ,

which uses Delta u_eps = -u_eps^p exactly.  Inside rho <= sigma/2 the
bracketed term vanishes identically, so no discrete Laplacian of the
blowing-up profile is ever formed; the cancellation is imposed, not
approximated.
"""

from dataclasses import dataclass, field

import numpy as np

from .mesh import GridFunction, MeshResolutionError
from .norms import weighted_holder_norm
from .radial import ScaledFamily


def _bump(x):
    """psi(x) = exp(-1/x) for x > 0, with first and second derivatives."""
    x = np.asarray(x, dtype=float)
    pos = x > 0.0
    val = np.zeros_like(x)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    xs = x[pos]
    e = np.exp(-1.0 / xs)
    val[pos] = e
    d1[pos] = e / xs ** 2
    d2[pos] = e * (1.0 / xs ** 4 - 2.0 / xs ** 3)
    return val, d1, d2


def _smoothstep(x):
    """S = psi(x) / (psi(x) + psi(1-x)): 0 at 0, 1 at 1, all derivatives flat.

    Returns (S, S', S'').  Clipped to the exact constants within 0.01 of the
    ends, where the true values are below e^-99.
    """
    x = np.asarray(x, dtype=float)
    S = np.zeros_like(x)
    S1 = np.zeros_like(x)
    S2 = np.zeros_like(x)
    S[x >= 0.99] = 1.0
    mid = (x > 0.01) & (x < 0.99)
    xm = x[mid]
    A, A1, A2 = _bump(xm)
    B, B1n, B2 = _bump(1.0 - xm)
    B1 = -B1n                       # d/dx psi(1-x)
    G = A + B
    S[mid] = A / G
    S1[mid] = (A1 * B - A * B1) / G ** 2
    S2[mid] = ((A2 * B - A * B2) * G - 2.0 * (A1 * B - A * B1) * (A1 + B1)) / G ** 3
    return S, S1, S2


@dataclass
class Cutoff:
    """Smooth radial cutoff: 1 on [0, sigma/2], 0 on [sigma, inf)."""

    sigma: float

    def _x(self, r):
        # transition coordinate: rho = sigma -> 0, rho = sigma/2 -> 1
        return 2.0 * (self.sigma - np.asarray(r, dtype=float)) / self.sigma

    def value(self, r):
        S, _, _ = _smoothstep(np.clip(self._x(r), 0.0, 1.0))
        return S

    def d1(self, r):
        _, S1, _ = _smoothstep(np.clip(self._x(r), 0.0, 1.0))
        return S1 * (-2.0 / self.sigma)

    def d2(self, r):
        _, _, S2 = _smoothstep(np.clip(self._x(r), 0.0, 1.0))
        return S2 * (4.0 / self.sigma ** 2)


class UnitCutoff:
    """chi = 1 everywhere: the diagnostic (no-boundary) configuration."""

    sigma = None

    def value(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def d1(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def d2(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


def build_cutoff(sigma):
    """Standard exponential-bump cutoff for a given outer radius sigma."""
    if sigma is None:
        return UnitCutoff()
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Cutoff(sigma=float(sigma))


def approximate_solution(params, profile, mesh, cutoff=None):
    """ubar_eps = chi(rho) u_eps(rho) as a GridFunction on the mesh."""
    chi = build_cutoff(params.sigma) if cutoff is None else cutoff
    fam = ScaledFamily(profile, params.epsilon)
    return GridFunction(mesh, chi.value(mesh.r) * fam.u(mesh.r))


@dataclass
class ErrorParts:
    """Three-term split of the glue error (summed node-wise into f_eps)."""

    laplace_part: np.ndarray    # a [Delta ubar + ubar^p]
    drift_part: np.ndarray      # grad ubar . grad a
    h_part: np.ndarray          # -a h ubar


def error_term(params, coeffs, profile, mesh, cutoff=None, with_parts=False):
    """Glue error f_eps = div(a grad ubar) - a h ubar + a ubar^p, analytically.

    The mesh must resolve the core scale (r_min <= eps/8).
    """
    if mesh.r_min > params.epsilon / 8.0:
        raise MeshResolutionError(
            f"mesh r_min = {mesh.r_min:g} does not resolve eps = {params.epsilon:g}"
        )
    p, N = params.p, params.N
    chi_f = build_cutoff(params.sigma) if cutoff is None else cutoff
    fam = ScaledFamily(profile, params.epsilon)
    r = mesh.r
    u = fam.u(r)
    up = fam.u_prime(r)
    chi = chi_f.value(r)
    chi1 = chi_f.d1(r)
    chi2 = chi_f.d2(r)
    a = coeffs.a.value(r)
    a1 = coeffs.a.d1(r)
    h = coeffs.h.value(r)
    laplace_part = a * ((chi2 + (N - 1.0) / r * chi1) * u + 2.0 * chi1 * up
                        + (chi ** p - chi) * u ** p)
    drift_part = (chi1 * u + chi * up) * a1
    h_part = -a * h * chi * u
    f = GridFunction(mesh, laplace_part + drift_part + h_part)
    if with_parts:
        return f, ErrorParts(laplace_part, drift_part, h_part)
    return f


def nonlinearity_Q(v, u_bar, coeffs, p):
    """Q(v) = a [ |ubar + v|^p - ubar^p - p ubar^(p-1) v ] node-wise.

    The absolute value is honored as written where ubar + v < 0.
    """
    mesh = u_bar.mesh
    vv = v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)
    ub = u_bar.values
    a = coeffs.a.value(mesh.r)
    q = a * (np.abs(ub + vv) ** p - ub ** p - p * ub ** (p - 1.0) * vv)
    return GridFunction(mesh, q)


@dataclass
class GlueData:
    """Everything the fixed-point driver needs at one epsilon."""

    u_bar: GridFunction
    f_eps: GridFunction
    parts: ErrorParts
    q_exponent: float
    f_norm: float               # ||f_eps||_{0,0,nu-2}


def build_glue(params, coeffs, profile, mesh, cutoff=None, m_shell=18):
    """Assemble ubar, f_eps and the norm ledger for one configuration."""
    u_bar = approximate_solution(params, profile, mesh, cutoff)
    f_eps, parts = error_term(params, coeffs, profile, mesh, cutoff, with_parts=True)
    f_norm = weighted_holder_norm(f_eps, k=0, alpha=0.0, nu=params.nu - 2.0,
                                  m_shell=m_shell).total
    return GlueData(u_bar=u_bar, f_eps=f_eps, parts=parts,
                    q_exponent=params.q_exponent, f_norm=f_norm)
