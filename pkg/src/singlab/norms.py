"""Discrete weighted Hölder and weighted L2 norms on dyadic shells.

The weighted norm of order (k, alpha) with core weight nu is

    max( plain C^{k,alpha} norm on {rho >= sigma/2},
         sup_m  s_m^{-nu} |w|_{k,alpha,s_m} )

over dyadic shells s_m = sigma 2^{-m}, where the shell seminorm is

    |w|_{k,alpha,s} = sum_{i<=k} s^i sup_shell |grad^i w|
                      + s^{k+alpha} Holder quotient of grad^k w.

The max-combination (instead of the sum of outer and shell parts) gives an
equivalent norm and keeps homogeneity exact; nothing downstream depends on
the distinction beyond a factor 2.

Derivative magnitudes for radial functions use |grad w| = |w'| and
|grad^2 w| = max(|w''|, |w'|/rho) (the two Hessian eigenvalues of a radial
function).  Mode channels add the angular factors sqrt(lambda_j)/rho and
lambda_j/rho^2 as sup-norm surrogates.

Alpha > 0 quotients are *sampled* over node pairs inside one shell separated
by at least two cells and at most s/4; sup-norm (alpha = 0) parts are exact
on the mesh.  All acceptance thresholds use alpha = 0.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .mesh import GridFunction, MeshResolutionError, radial_d1, radial_d2, sphere_area


@dataclass
class ShellDecomposition:
    """Dyadic shells s_m = sigma 2^{-m} with per-shell node index slices."""

    sigma: float
    radii: np.ndarray           # s_m for m = 0..M
    slices: list                # index arrays: nodes with s_m/2 <= rho < s_m

    @property
    def m_max(self):
        return len(self.radii) - 1


def shell_decomposition(mesh, m_shell=18, min_nodes=2):
    """Decompose the mesh core into dyadic shells below sigma.

    Shells are clipped to the range the mesh resolves (the innermost shell
    must lie fully above r_min); a covered but under-populated shell raises
    MeshResolutionError naming the shell.
    """
    sigma = mesh.sigma
    avail = int(math.floor(math.log2(sigma / mesh.r_min))) - 1
    m_max = min(m_shell, avail)
    if m_max < 0:
        raise MeshResolutionError(
            f"mesh r_min={mesh.r_min:g} leaves no dyadic shell below sigma={sigma:g}"
        )
    radii, slices = [], []
    for m in range(m_max + 1):
        s = sigma * 2.0 ** (-m)
        idx = np.nonzero((mesh.r >= s / 2.0) & (mesh.r < s))[0]
        if len(idx) < min_nodes:
            raise MeshResolutionError(
                f"shell m={m} ([{s / 2.0:g}, {s:g})) holds {len(idx)} nodes < {min_nodes}"
            )
        radii.append(s)
        slices.append(idx)
    return ShellDecomposition(sigma=sigma, radii=np.array(radii), slices=slices)


@dataclass
class NormReport:
    """Weighted norm with its per-shell breakdown."""

    total: float
    outer_part: float
    shell_parts: np.ndarray     # s_m^{-nu} |w|_{k,alpha,s_m}
    shell_radii: np.ndarray
    k: int
    alpha: float
    nu: float


def _channel_levels(values, r, k, lam):
    """|w|, |grad w|, |grad^2 w| surrogates for one mode channel."""
    out = [np.abs(values)]
    if k >= 1:
        d1 = radial_d1(values, r)
        out.append(np.abs(d1) + math.sqrt(lam) * np.abs(values) / r)
        if k >= 2:
            d2 = radial_d2(values, r)
            lvl2 = np.maximum(np.abs(d2), np.abs(d1) / r)
            lvl2 = lvl2 + lam * np.abs(values) / r ** 2 + math.sqrt(lam) * np.abs(d1) / r
            out.append(lvl2)
    return out


def _holder_quotient(level_k, r, idx, alpha, min_gap=2):
    """Sampled Holder quotient of grad^k w over pairs inside one node set."""
    if alpha <= 0.0 or len(idx) < min_gap + 1:
        return 0.0
    v = level_k[idx]
    rr = r[idx]
    s_cap = rr[-1] / 4.0
    best = 0.0
    for gap in range(min_gap, len(idx)):
        d = rr[gap:] - rr[:-gap]
        ok = d <= s_cap
        if not np.any(ok):
            break
        q = np.abs(v[gap:] - v[:-gap])[ok] / d[ok] ** alpha
        best = max(best, float(q.max()))
    return best


def weighted_holder_norm(gf, k=0, alpha=0.0, nu=0.0, m_shell=18):
    """Discrete weighted Hölder norm of a grid function; returns a NormReport."""
    if k > 2:
        raise ValueError("only k <= 2 is supported")
    mesh = gf.mesh
    r = mesh.r
    shells = shell_decomposition(mesh, m_shell=m_shell)
    if gf.is_radial:
        channels = [_channel_levels(gf.values, r, k, 0.0)]
    else:
        from .exponents import sphere_eigenvalue
        if mesh.dim is None:
            raise ValueError("mode-decomposed norms need mesh.dim (the ambient N)")
        channels = [_channel_levels(gf.values[j], r, k, sphere_eigenvalue(j, mesh.dim))
                    for j in range(gf.n_channels)]

    outer_idx = np.nonzero(r >= mesh.sigma / 2.0)[0]
    shell_parts = np.zeros(shells.m_max + 1)
    outer_part = 0.0
    for levels in channels:
        part = 0.0
        for lv in levels:
            part = max(part, float(np.max(lv[outer_idx])))
        part = max(part, _holder_quotient(levels[k], r, outer_idx, alpha))
        outer_part = max(outer_part, part)
        for m, idx in enumerate(shells.slices):
            s = shells.radii[m]
            semi = 0.0
            for i, lv in enumerate(levels):
                semi += s ** i * float(np.max(lv[idx]))
            semi += s ** (k + alpha) * _holder_quotient(levels[k], r, idx, alpha)
            shell_parts[m] = max(shell_parts[m], s ** (-nu) * semi)
    total = max(outer_part, float(shell_parts.max()) if len(shell_parts) else 0.0)
    return NormReport(total=total, outer_part=outer_part, shell_parts=shell_parts,
                      shell_radii=shells.radii, k=k, alpha=alpha, nu=nu)


def weighted_sup_norm(gf, nu, m_shell=18):
    """Shorthand for the (0, 0, nu) weighted norm total."""
    return weighted_holder_norm(gf, k=0, alpha=0.0, nu=nu, m_shell=m_shell).total


def weighted_l2_norm(gf, delta, N):
    """sqrt of  integral  rho^{-2-2delta} w^2 dx  over the mesh ball.

    Radial quadrature with the sphere factor |S^{N-1}|; mode channels add in
    quadrature (eigenfunctions are L2-orthonormal up to the channel scale).
    """
    mesh = gf.mesh
    r = mesh.r
    qw = mesh.quad_weights()
    dens = r ** (N - 1.0 - 2.0 - 2.0 * delta)
    if gf.is_radial:
        total = np.sum(qw * dens * gf.values ** 2)
    else:
        total = np.sum(qw * dens * (gf.values ** 2).sum(axis=0))
    return math.sqrt(sphere_area(N) * total)


def weighted_l2_norm_region(gf, delta, N, r_lo, r_hi):
    """Same quadrature restricted to r_lo <= rho <= r_hi."""
    mesh = gf.mesh
    r = mesh.r
    qw = mesh.quad_weights()
    mask = (r >= r_lo) & (r <= r_hi)
    dens = np.where(mask, r ** (N - 1.0 - 2.0 - 2.0 * delta), 0.0)
    vals = gf.values ** 2 if gf.is_radial else (gf.values ** 2).sum(axis=0)
    return math.sqrt(sphere_area(N) * np.sum(qw * dens * vals))


@dataclass
class AlgebraReport:
    product_lhs: float
    product_rhs: float
    product_constant: float
    gradient_norm: float
    gradient_ratio: float
    power_lhs: float
    power_rhs: float
    power_constant: float


def norm_algebra_check(gf1, gf2, gamma1, gamma2, k=0, alpha=0.0, p_power=2.0, m_shell=18):
    """Empirical constants for the product, gradient and power norm inequalities.

    * product:   ||w1 w2||_{k,alpha,gamma1+gamma2} <= C ||w1|| ||w2||
    * gradient:  ||grad w1||_{k-1..., gamma1-1} against |gamma1| ||w1||
    * power:     ||w1^p||_{k,alpha,p*gamma1} <= C ||w1||^p   (w1 > 0)
    """
    n1 = weighted_holder_norm(gf1, k, alpha, gamma1, m_shell).total
    n2 = weighted_holder_norm(gf2, k, alpha, gamma2, m_shell).total
    prod = GridFunction(gf1.mesh, gf1.values * gf2.values)
    lhs = weighted_holder_norm(prod, k, alpha, gamma1 + gamma2, m_shell).total
    grad = GridFunction(gf1.mesh, radial_d1(gf1.values, gf1.mesh.r))
    gn = weighted_holder_norm(grad, max(k - 1, 0), alpha, gamma1 - 1.0, m_shell).total
    gratio = gn / (abs(gamma1) * n1) if gamma1 != 0 and n1 > 0 else float("nan")
    if np.all(gf1.values > 0):
        powgf = GridFunction(gf1.mesh, gf1.values ** p_power)
        plhs = weighted_holder_norm(powgf, k, alpha, p_power * gamma1, m_shell).total
        prhs = n1 ** p_power
    else:
        plhs, prhs = float("nan"), float("nan")
    return AlgebraReport(
        product_lhs=lhs, product_rhs=n1 * n2,
        product_constant=lhs / (n1 * n2) if n1 * n2 > 0 else float("nan"),
        gradient_norm=gn, gradient_ratio=gratio,
        power_lhs=plhs, power_rhs=prhs,
        power_constant=plhs / prhs if prhs and prhs > 0 else float("nan"),
    )
