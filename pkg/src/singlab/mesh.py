"""Graded radial meshes and grid functions on them.

The solver mesh is geometric (constant ratio) from r_min up to sigma, so that
every dyadic shell [s/2, s] carries the same number of nodes, and uniform
from sigma to the outer radius R.  All finite differences use the exact
3-point nonuniform formulas, which are second order on smoothly graded
meshes.
"""

from dataclasses import dataclass, field
import math

import numpy as np


class MeshResolutionError(ValueError):
    """Raised when a mesh is too coarse for the requested operation."""


@dataclass
class GradedMesh:
    """Radial mesh: geometric below sigma, uniform above, Dirichlet end at R."""

    r: np.ndarray
    sigma: float
    epsilon: float = None
    nodes_per_shell: int = 16
    dim: int = None             # ambient N, needed for mode-channel norms

    @property
    def n(self):
        return len(self.r)

    @property
    def r_min(self):
        return float(self.r[0])

    @property
    def R(self):
        return float(self.r[-1])

    def quad_weights(self):
        """Trapezoidal weights on the radial line (no sphere factor)."""
        r = self.r
        w = np.zeros_like(r)
        dr = np.diff(r)
        w[:-1] += 0.5 * dr
        w[1:] += 0.5 * dr
        return w

    def shell_count(self):
        """Number of whole dyadic shells [s/2, s] resolved below sigma."""
        return int(math.floor(math.log2(self.sigma / self.r_min)))


def graded_mesh(r_min, sigma, R, nodes_per_shell=16, epsilon=None, dim=None):
    """Build the standard solver mesh.

    Geometric spacing with ratio 2^(1/nodes_per_shell) on [r_min, sigma]
    guarantees >= nodes_per_shell nodes per dyadic shell; the uniform part
    above sigma matches the geometric spacing at sigma.
    """
    if not (0.0 < r_min < sigma < R):
        raise MeshResolutionError(f"need 0 < r_min={r_min} < sigma={sigma} < R={R}")
    if nodes_per_shell < 8:
        raise MeshResolutionError(f"nodes_per_shell={nodes_per_shell} must be >= 8")
    q = 2.0 ** (1.0 / nodes_per_shell)
    # exact geometric span [r_min, sigma] with ratio q' <= q: the grading is
    # smooth everywhere (no clamped first cell, which would cost an order of
    # local accuracy), and q' <= q keeps >= nodes_per_shell nodes per shell
    n_geo = int(math.ceil(math.log(sigma / r_min) / math.log(q)))
    q_eff = (sigma / r_min) ** (1.0 / n_geo)
    r_geo = r_min * q_eff ** np.arange(n_geo + 1.0)
    r_geo[-1] = sigma
    h_u = sigma * (q_eff - 1.0)
    n_u = max(int(math.ceil((R - sigma) / h_u)), 4)
    r_u = np.linspace(sigma, R, n_u + 1)[1:]
    return GradedMesh(r=np.concatenate([r_geo, r_u]), sigma=sigma,
                      epsilon=epsilon, nodes_per_shell=nodes_per_shell, dim=dim)


def derivative_coeffs(r):
    """3-point nonuniform coefficients for w' and w'' at interior nodes.

    Returns ((c1m, c1c, c1p), (c2m, c2c, c2p)), each an array of length n-2.
    Exact on quadratics.
    """
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    denom = hm * hp * (hm + hp)
    c2m = 2.0 * hp / denom
    c2c = -2.0 * (hm + hp) / denom
    c2p = 2.0 * hm / denom
    c1m = -hp ** 2 / denom
    c1c = (hp ** 2 - hm ** 2) / denom
    c1p = hm ** 2 / denom
    return (c1m, c1c, c1p), (c2m, c2c, c2p)


def radial_d1(values, r):
    """First derivative on a nonuniform mesh; one-sided 2nd-order at the ends."""
    v = np.asarray(values, dtype=float)
    (c1m, c1c, c1p), _ = derivative_coeffs(r)
    out = np.empty_like(v)
    out[1:-1] = c1m * v[:-2] + c1c * v[1:-1] + c1p * v[2:]
    # the Lagrange formula accepts signed offsets, so it serves both ends
    out[0] = _onesided_d1(r[0], r[1], r[2], v[0], v[1], v[2])
    out[-1] = _onesided_d1(r[-1], r[-2], r[-3], v[-1], v[-2], v[-3])
    return out


def radial_d2(values, r):
    """Second derivative on a nonuniform mesh; copied inward at the ends."""
    v = np.asarray(values, dtype=float)
    _, (c2m, c2c, c2p) = derivative_coeffs(r)
    out = np.empty_like(v)
    out[1:-1] = c2m * v[:-2] + c2c * v[1:-1] + c2p * v[2:]
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def _onesided_d1(x0, x1, x2, f0, f1, f2):
    # 2nd-order one-sided derivative at x0 (x1, x2 on one side)
    h1 = x1 - x0
    h2 = x2 - x0
    return (f1 * h2 ** 2 - f2 * h1 ** 2 - f0 * (h2 ** 2 - h1 ** 2)) / (h1 * h2 * (h2 - h1))


def sphere_area(N):
    """Surface measure of the unit (N-1)-sphere: 2 pi^(N/2) / Gamma(N/2)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass
class GridFunction:
    """Values on a radial mesh, optionally split into mode channels.

    ``values`` has shape (n,) for a radial function or (J+1, n) for a
    mode-decomposed one (channel j holds the coefficient of the j-th
    sphere eigenfunction).
    """

    mesh: GradedMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.mesh.n:
            raise ValueError(
                f"values last dim {self.values.shape[-1]} != mesh size {self.mesh.n}"
            )

    @property
    def is_radial(self):
        return self.values.ndim == 1

    @property
    def n_channels(self):
        return 1 if self.is_radial else self.values.shape[0]

    def channel(self, j):
        if self.is_radial:
            if j != 0:
                raise ValueError("radial grid function has only channel 0")
            return self.values
        return self.values[j]

    def radial_part(self):
        return self.values if self.is_radial else self.values[0]

    def d1(self):
        if self.is_radial:
            return radial_d1(self.values, self.mesh.r)
        return np.stack([radial_d1(v, self.mesh.r) for v in self.values])

    def d2(self):
        if self.is_radial:
            return radial_d2(self.values, self.mesh.r)
        return np.stack([radial_d2(v, self.mesh.r) for v in self.values])

    def __add__(self, other):
        ov = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.mesh, self.values + ov)

    def __sub__(self, other):
        ov = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.mesh, self.values - ov)

    def __mul__(self, c):
        return GridFunction(self.mesh, self.values * c)

    __rmul__ = __mul__
