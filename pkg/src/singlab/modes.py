"""Mode-decomposed discretization and inversion of the linearized operator.

The linearization around the glued approximate solution is

    L v = div(a grad v) + a [p ubar^(p-1) - h] v ,

which on sphere-harmonic mode j reduces to the radial operator

    (L/a) w = w'' + ((N-1)/rho + a'/a) w' + (p ubar^(p-1) - h - lambda_j/rho^2) w

discretized with second-order nonuniform differences on a graded mesh.
The outer boundary is Dirichlet (w(R) = 0).  The inner closure at r_min is
the Frobenius ray condition  d/drho (rho^(-gamma) w) = 0  at the *requested
weight* gamma: it selects the discrete representative of the weighted class
annihilating the rho^gamma monomial exactly, reproduces manufactured
solutions to O(h^2), and degenerates precisely when gamma sits on an
indicial root (which the weight guard rejects up front).

Also here: the empirical Green-map norm probe, the maximum-principle and
Hardy checks, the coercivity constant of the quadratic form, homogeneous
nullspace scans in log-radius, and the inverse-square-model stability probe.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponents import (
    ParameterWindowError, core_potential, delta_exponent, indicial_roots_infinity,
    indicial_roots_origin, indicial_table, sphere_eigenvalue,
)
from .mesh import GradedMesh, GridFunction, MeshResolutionError, graded_mesh
from .norms import weighted_holder_norm, weighted_l2_norm, weighted_l2_norm_region


class SingularSolveError(RuntimeError):
    """Linear solve hit a (near-)singular mode system."""


class NormalizationError(RuntimeError):
    """The maximum-principle normalization precondition is violated."""


def solver_mesh(params, nodes_per_shell=16, r_min_factor=1e-3):
    """Default graded mesh for a given configuration: r_min = eps * factor."""
    return graded_mesh(params.epsilon * r_min_factor, params.sigma, params.R,
                       nodes_per_shell=nodes_per_shell, epsilon=params.epsilon,
                       dim=params.N)


@dataclass
class ModeOperator:
    """Tridiagonal realization of (L/a) on one mode channel."""

    j: int
    mesh: GradedMesh
    matrix: sp.csc_matrix = field(repr=False)
    potential: np.ndarray = field(repr=False)    # p ubar^(p-1) - h
    linear_part: np.ndarray = field(repr=False)  # p ubar^(p-1) alone
    a_values: np.ndarray = field(repr=False)
    gamma_ray: float = None                      # inner closure exponent (None = Dirichlet)
    _lu: object = field(default=None, repr=False)

    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix)
        return self._lu

    def apply(self, w):
        """Discrete (L/a) w at interior nodes (boundary rows excluded)."""
        return (self.matrix @ w)[1:-1]

    def solve(self, f_over_a_interior):
        """Solve with boundary rows = 0 and interior rows = f/a."""
        rhs = np.zeros(self.mesh.n)
        rhs[1:-1] = f_over_a_interior
        try:
            out = self.lu().solve(rhs)
        except RuntimeError as exc:
            raise SingularSolveError(f"mode {self.j}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise SingularSolveError(f"mode {self.j}: non-finite solve output")
        return out


def assemble_mode(j, params, coeffs, ubar_values, mesh, gamma_ray=None,
                  inner_bc="ray", guard_table=None):
    """Build the mode-j operator around the approximate solution values.

    ``gamma_ray`` defaults to params.nu.  ``inner_bc`` may be "ray" or
    "dirichlet" (the annulus/maximum-principle configuration).
    """
    r = mesh.r
    n = mesh.n
    p, N = params.p, params.N
    a = coeffs.a.value(r)
    ap = coeffs.a.d1(r)
    h = coeffs.h.value(r)
    if gamma_ray is None:
        gamma_ray = params.nu
    if inner_bc == "ray":
        if guard_table is None:
            guard_table = indicial_table(p, N, j_max=max(j, 10))
        guard_table.guard_weight(gamma_ray)
    lam = sphere_eigenvalue(j, N)
    ubar = np.asarray(ubar_values, dtype=float)
    linear_part = p * np.abs(ubar) ** (p - 1.0)
    potential = linear_part - h

    from .mesh import derivative_coeffs
    (c1m, c1c, c1p), (c2m, c2c, c2p) = derivative_coeffs(r)
    drift = (N - 1.0) / r[1:-1] + ap[1:-1] / a[1:-1]
    main = np.empty(n)
    lo = np.empty(n - 1)
    up = np.empty(n - 1)
    main[1:-1] = c2c + drift * c1c - lam / r[1:-1] ** 2 + potential[1:-1]
    lo[:-1] = c2m + drift * c1m
    up[1:] = c2p + drift * c1p
    if inner_bc == "ray":
        h0 = r[1] - r[0]
        main[0] = -1.0 / h0 - gamma_ray / (r[0] + r[1])
        up[0] = 1.0 / h0 - gamma_ray / (r[0] + r[1])
    elif inner_bc == "dirichlet":
        main[0], up[0] = 1.0, 0.0
        gamma_ray = None
    else:
        raise ValueError(f"unknown inner_bc '{inner_bc}'")
    main[-1], lo[-1] = 1.0, 0.0
    matrix = sp.diags([lo, main, up], [-1, 0, 1], format="csc")
    return ModeOperator(j=j, mesh=mesh, matrix=matrix, potential=potential,
                        linear_part=linear_part, a_values=a, gamma_ray=gamma_ray)


def potential_core_ratio(op, params, rho=None):
    """p ubar^(p-1) rho^2 / (p k(p,N)) at a deep-core radius (-> 1 as rho/eps -> 0)."""
    r = op.mesh.r
    if rho is None:
        rho = params.epsilon * 1e-2
    i = int(np.argmin(np.abs(r - rho)))
    return float(op.linear_part[i] * r[i] ** 2 / core_potential(params.p, params.N))


class GreenSolver:
    """Per-mode factorized solver realizing a right inverse of L.

    Solves L v = f with v(R) = 0 and the weight-ray inner closure; f may be
    radial (mode 0 only) or mode-decomposed.
    """

    def __init__(self, params, coeffs, ubar_values, mesh, nu=None, j_max=10,
                 guard=True):
        self.params = params
        self.coeffs = coeffs
        self.mesh = mesh
        self.nu = params.nu if nu is None else nu
        self.j_max = j_max
        self.table = indicial_table(params.p, params.N, j_max=max(j_max, 10))
        if guard:
            self.table.guard_weight(self.nu)
        self.ubar = np.asarray(ubar_values, dtype=float)
        self.a_values = coeffs.a.value(mesh.r)
        self._ops = {}

    def op(self, j):
        if j not in self._ops:
            self._ops[j] = assemble_mode(
                j, self.params, self.coeffs, self.ubar, self.mesh,
                gamma_ray=self.nu, guard_table=self.table)
        return self._ops[j]

    def solve(self, f):
        """Apply the Green map to a GridFunction (or ndarray, taken radial)."""
        if isinstance(f, GridFunction):
            vals = f.values
            mesh = f.mesh
        else:
            vals = np.asarray(f, dtype=float)
            mesh = self.mesh
        if mesh.n != self.mesh.n:
            raise ValueError("grid function lives on a different mesh")
        if vals.ndim == 1:
            out = self.op(0).solve(vals[1:-1] / self.a_values[1:-1])
            return GridFunction(self.mesh, out)
        chans = [self.op(j).solve(vals[j][1:-1] / self.a_values[1:-1])
                 for j in range(vals.shape[0])]
        return GridFunction(self.mesh, np.stack(chans))


def apply_green(f, params, coeffs, ubar_values, mesh, nu=None, m_shell=18):
    """One-shot Green solve; returns (solution, weighted C^2_nu norm report)."""
    solver = GreenSolver(params, coeffs, ubar_values, mesh, nu=nu)
    v = solver.solve(f)
    rep = weighted_holder_norm(v, k=2, alpha=0.0,
                               nu=solver.nu, m_shell=m_shell)
    return v, rep


def _random_weighted_rhs(mesh, nu, rng):
    """Random radial f with ||f||_{0,0,nu-2} = 1 (smooth modulation of the weight)."""
    r = mesh.r
    x = np.log(r)
    c = rng.standard_normal(5)
    smooth = (c[0] + c[1] * np.sin(x / 2.0) + c[2] * np.cos(x / 3.0)
              + c[3] * np.sin(x / 5.0) + c[4] * np.cos(x / 7.0))
    shape = np.minimum(r, mesh.sigma) ** (nu - 2.0)
    f = GridFunction(mesh, shape * smooth)
    n = weighted_holder_norm(f, k=0, alpha=0.0, nu=nu - 2.0).total
    if n == 0.0:
        return None
    return GridFunction(mesh, f.values / n)


def green_norm_probe(params, coeffs, ubar_values, mesh, sample_count=16, seed=0,
                     nu=None):
    """Empirical operator norm of the Green map C^0_(nu-2) -> C^0_nu."""
    solver = GreenSolver(params, coeffs, ubar_values, mesh, nu=nu)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sample_count):
        f = _random_weighted_rhs(mesh, solver.nu, rng)
        if f is None:
            continue
        v = solver.solve(f)
        worst = max(worst, weighted_holder_norm(v, k=0, alpha=0.0, nu=solver.nu).total)
    return worst


# ---------------------------------------------------------------------------
# maximum principle, coercivity, Hardy
# ---------------------------------------------------------------------------

def check_normalization(params, coeffs, profile, c0):
    """Verify  p a ubar_eps^(p-1) <= c0 (N-2)^2 / (8 rho^2)  on rho >= eps.

    Returns the margin  sup rho^2 p a ubar^(p-1) / bound  (needs <= 1).
    On violation raises NormalizationError reporting the rescaling needed.
    """
    from .radial import ScaledFamily
    p, N = params.p, params.N
    fam = ScaledFamily(profile, params.epsilon)
    rho = np.geomspace(params.epsilon, params.R, 4001)
    aa = coeffs.a.value(rho)
    vals = p * aa * rho ** 2 * fam.u(rho) ** (p - 1.0)   # ubar <= u_eps (chi <= 1)
    bound = c0 * (N - 2.0) ** 2 / 8.0
    margin = float(np.max(vals) / bound)
    if margin > 1.0:
        raise NormalizationError(
            f"normalization violated: sup p a rho^2 u^(p-1) = {np.max(vals):.4g} "
            f"> c0 (N-2)^2/8 = {bound:.4g}; rescale the profile by "
            f"select_normalization with alpha_bound = {bound / (p * np.max(aa)):.4g}"
        )
    return margin


def max_principle_check(params, coeffs, profile, trials=100, seed=0, c0=None,
                        nodes_per_shell=16, enforce_normalization=True):
    """Solve L w = g >= 0 on the annulus eps <= rho <= R with w = 0 on both
    boundary spheres and check w <= 0 (the discrete maximum principle).

    Returns a dict report; raises NormalizationError when the precondition
    fails and enforce_normalization is True.
    """
    from .radial import ScaledFamily
    mesh = graded_mesh(params.epsilon, params.sigma, params.R,
                       nodes_per_shell=nodes_per_shell, epsilon=params.epsilon,
                       dim=params.N)
    if c0 is None:
        c0 = coercivity_constant(coeffs, mesh, params.N)
    margin = None
    if enforce_normalization:
        margin = check_normalization(params, coeffs, profile, c0)
    fam = ScaledFamily(profile, params.epsilon)
    from .glue import build_cutoff
    chi = build_cutoff(params.sigma)
    ubar = chi.value(mesh.r) * fam.u(mesh.r)
    op = assemble_mode(0, params, coeffs, ubar, mesh, inner_bc="dirichlet")
    rng = np.random.default_rng(seed)
    a_int = op.a_values[1:-1]
    violations = 0
    worst = 0.0
    for _ in range(trials):
        g = rng.random(mesh.n - 2)          # g >= 0
        w = op.solve(g / a_int)
        pos = float(np.max(w))
        worst = max(worst, pos)
        if pos > 1e-10 * max(1.0, float(np.max(np.abs(w)))):
            violations += 1
    return {
        "trials": trials,
        "violations": violations,
        "worst_positive_part": worst,
        "normalization_margin": margin,
        "coercivity_c0": c0,
    }


def _p1_forms(coeffs, mesh, N, with_h=True, weight_a=True):
    """P1 stiffness/mass pair on the radial mesh with measure rho^(N-1).

    Dirichlet at R only (functions are free at r_min, matching H^1_0 of the
    ball).  Cell integrals by 2-point Gauss.
    """
    r = mesh.r
    n = mesh.n
    gauss = 0.5 * (1.0 - 1.0 / math.sqrt(3.0)), 0.5 * (1.0 + 1.0 / math.sqrt(3.0))
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for i in range(n - 1):
        h = r[i + 1] - r[i]
        for gx in gauss:
            x = r[i] + gx * h
            wq = 0.5 * h
            dens = x ** (N - 1.0)
            aval = coeffs.a.value(np.array([x]))[0] if weight_a else 1.0
            hval = coeffs.h.value(np.array([x]))[0] if with_h else 0.0
            # hat gradients: -1/h, +1/h ; values: 1-gx, gx
            kloc = aval * dens * wq / h ** 2
            K[i, i] += kloc
            K[i + 1, i + 1] += kloc
            K[i, i + 1] -= kloc
            K[i + 1, i] -= kloc
            phi = np.array([1.0 - gx, gx])
            mloc = aval * hval * dens * wq
            for aidx in range(2):
                for bidx in range(2):
                    M[i + aidx, i + bidx] += mloc * phi[aidx] * phi[bidx]
    # Dirichlet at the outer node
    return K[:-1, :-1], M[:-1, :-1]


def coercivity_constant(coeffs, mesh, N):
    """Best c0 with  int a(|grad v|^2 + h v^2) >= c0 int |grad v|^2  (mode 0).

    Computed as the smallest generalized eigenvalue of the discrete radial
    form pair; c0 <= 0 rejects the configuration.
    """
    Kah, Mah = _p1_forms(coeffs, mesh, N, with_h=True, weight_a=True)
    from .coefficients import unit_field
    K1, _ = _p1_forms(unit_field(), mesh, N, with_h=False, weight_a=True)
    A = Kah + Mah
    evals = sla.eigh(A, K1, eigvals_only=True, subset_by_index=[0, 0])
    c0 = float(evals[0])
    if c0 <= 0.0:
        raise ParameterWindowError(f"operator not coercive: c0 = {c0:.4g} <= 0")
    return c0


def first_dirichlet_eigenvalue(mesh, N):
    """Independent oracle: smallest eigenvalue of -Delta on the ball (mode 0)."""
    from .coefficients import unit_field, CoefficientField, constant
    uf = CoefficientField(a=constant(1.0), h=constant(1.0))
    K1, M1 = _p1_forms(uf, mesh, N, with_h=True, weight_a=True)
    evals = sla.eigh(K1, M1, eigvals_only=True, subset_by_index=[0, 0])
    return float(evals[0])


def hardy_check(mesh, N, trials=100, seed=0):
    """Check  int w^2 rho^(N-3) <= (4/(N-2)^2) int w'^2 rho^(N-1)  for trial
    radial functions vanishing at R.  Returns a report dict."""
    if N < 3:
        raise ValueError("Hardy inequality needs N >= 3")
    r = mesh.r
    qw = mesh.quad_weights()
    rng = np.random.default_rng(seed)
    const = 4.0 / (N - 2.0) ** 2
    worst_ratio = 0.0
    failures = 0
    for _ in range(trials):
        c = rng.standard_normal(4)
        w = (1.0 - r / mesh.R) * (c[0] + c[1] * r + c[2] * np.sin(2.0 * r / mesh.R)
                                  + c[3] * r ** 2)
        from .mesh import radial_d1
        dw = radial_d1(w, r)
        lhs = float(np.sum(qw * w ** 2 * r ** (N - 3.0)))
        rhs = float(np.sum(qw * dw ** 2 * r ** (N - 1.0)))
        if rhs == 0.0:
            continue
        ratio = lhs / rhs
        worst_ratio = max(worst_ratio, ratio)
        if ratio > const * (1.0 + 1e-6):
            failures += 1
    return {"trials": trials, "failures": failures,
            "worst_ratio": worst_ratio, "hardy_constant": const}


# ---------------------------------------------------------------------------
# nullspace scans (log-radius IVPs)
# ---------------------------------------------------------------------------

def _log_mode_rhs_factory(model, p, N, lam, profile):
    """v'' + (N-2) v' + (P(x) - lam) v = 0 in x = log rho."""
    if model == "model_Ap":
        Ap = core_potential(p, N)

        def rhs(x, y):
            return [y[1], -(N - 2.0) * y[1] + (lam - Ap) * y[0]]
    elif model == "L1":
        if profile is None:
            def rhs(x, y):   # pure Laplacian control (u1 = 0)
                return [y[1], -(N - 2.0) * y[1] + lam * y[0]]
        else:
            def rhs(x, y):
                P = p * profile.w_at(x) ** (p - 1.0)
                return [y[1], -(N - 2.0) * y[1] + (lam - P) * y[0]]
    else:
        raise ValueError(f"unknown model '{model}'")
    return rhs


def _branch_basis(alpha, omega, x):
    """Solutions e^(alpha x) cos/sin(omega x) (omega = 0: e^(a1 x), e^(a2 x))."""
    if omega == 0.0:
        raise ValueError("use real exponent pair instead")
    e = math.exp(alpha * x)
    c, s = math.cos(omega * x), math.sin(omega * x)
    phi1 = (e * c, e * (alpha * c - omega * s))
    phi2 = (e * s, e * (alpha * s + omega * c))
    return phi1, phi2


def _decompose_at(x, v, vp, exps):
    """Coefficients of (v, v') in the exponential branch basis at x.

    ``exps`` is (e1, e2) real or a complex conjugate pair (alpha +- i omega).
    Returns (c1, c2, scale1, scale2): scales are |basis value| at x.
    """
    e1, e2 = exps
    if isinstance(e1, complex) and abs(e1.imag) > 1e-14:
        alpha, omega = e1.real, abs(e1.imag)
        (f1, d1), (f2, d2) = _branch_basis(alpha, omega, x)
        A = np.array([[f1, f2], [d1, d2]])
        c = np.linalg.solve(A, np.array([v, vp]))
        scale = math.exp(alpha * x)
        return c[0], c[1], scale, scale
    e1 = e1.real if isinstance(e1, complex) else e1
    e2 = e2.real if isinstance(e2, complex) else e2
    A = np.array([[math.exp(e1 * x), math.exp(e2 * x)],
                  [e1 * math.exp(e1 * x), e2 * math.exp(e2 * x)]])
    c = np.linalg.solve(A, np.array([v, vp]))
    return c[0], c[1], math.exp(e1 * x), math.exp(e2 * x)


def _mode_mismatch(model, p, N, j, gamma, gamma_out, profile, x0, x1, margin):
    """Growth share at the outer end for the admissibly-seeded mode solutions.

    Returns (mismatch, seed_dim).  mismatch = inf when no local branch at the
    origin is bounded by rho^gamma; 0 when no outer branch exceeds the outer
    weight.
    """
    lam = sphere_eigenvalue(j, N)
    if model == "model_Ap" or (model == "L1" and profile is not None):
        gm, gp, _ = indicial_roots_origin(p, N, j)
    else:   # pure Laplacian control
        tm, tp = indicial_roots_infinity(N, j)
        gm, gp = complex(tm), complex(tp)
    seeds = []
    for g in (gp, gm):
        if g.real >= gamma - margin:
            seeds.append(g)
    if not seeds:
        return float("inf"), 0
    if model == "model_Ap":
        out_exps = indicial_roots_origin(p, N, j)[:2]   # Euler: same at infinity
    else:
        out_exps = tuple(complex(e) for e in indicial_roots_infinity(N, j))
    bad = [i for i, e in enumerate(out_exps)
           if (e.real if isinstance(e, complex) else e) > gamma_out + margin]
    if not bad:
        return 0.0, len(seeds)

    rhs = _log_mode_rhs_factory(model, p, N, lam, profile)

    def run(seed_exp, phase=0.0):
        if isinstance(seed_exp, complex) and abs(seed_exp.imag) > 1e-14:
            alpha, omega = seed_exp.real, abs(seed_exp.imag)
            v0 = math.cos(phase)
            vp0 = alpha * math.cos(phase) - omega * math.sin(phase)
        else:
            g = seed_exp.real if isinstance(seed_exp, complex) else seed_exp
            v0, vp0 = 1.0, g
        sol = solve_ivp(rhs, [x0, x1], [v0, vp0], rtol=1e-12, atol=1e-300,
                        method="DOP853")
        if not sol.success:
            raise SingularSolveError(f"mode {j} scan integration failed")
        return sol.y[0, -1], sol.y[1, -1]

    def share(v, vp):
        c1, c2, s1, s2 = _decompose_at(x1, v, vp, out_exps)
        mags = np.array([abs(c1) * s1, abs(c2) * s2])
        tot = mags.sum()
        if tot == 0.0:
            return 0.0
        return float(mags[bad].sum() / tot)

    spiral = abs(seeds[0].imag) > 1e-14
    if spiral:
        # complex pair: the two real solutions are the cos/sin phases
        ends = [run(seeds[0], phase=ph) for ph in (0.0, math.pi / 2.0)]
    else:
        distinct = sorted({round(s.real, 12) for s in seeds})
        if len(distinct) == 1:
            # double root: the rho^gamma log-partner is measure-zero, skip it
            seeds = seeds[:1]
        ends = [run(s) for s in seeds]
    if len(ends) == 1:
        return share(*ends[0]), 1
    # two-dimensional admissible seed space: minimize the growth share over
    # unit combinations of the two seeds
    best = float("inf")
    for th in np.linspace(0.0, math.pi, 64, endpoint=False):
        v = math.cos(th) * ends[0][0] + math.sin(th) * ends[1][0]
        vp = math.cos(th) * ends[0][1] + math.sin(th) * ends[1][1]
        best = min(best, share(v, vp))
    return best, len(ends)


def nullspace_scan(gamma, p, N, model="model_Ap", j_max=5, profile=None,
                   gamma_out=None, x0=-16.0, x1=10.0, allow_indicial=False,
                   margin=1e-9):
    """Scan modes 0..j_max for homogeneous solutions admissible at both ends.

    Seeds the branches bounded by rho^gamma at the origin, integrates the
    mode ODE outward in log-radius, and measures the share of the outer
    expansion lying in branches that grow faster than rho^gamma_out.
    gamma_out defaults to 0 for the L1 model around a profile (bounded at
    infinity) and to gamma otherwise (the same weight at both ends).
    A positive minimum over modes certifies the empty nullspace; an indicial
    hit shows up as a vanishing mismatch.
    """
    if gamma_out is None:
        gamma_out = 0.0 if (model == "L1" and profile is not None) else gamma
    if not allow_indicial:
        roots = []
        for j in range(j_max + 1):
            if model == "L1" and profile is None:
                roots.extend(indicial_roots_infinity(N, j))
            else:
                gm, gp, _ = indicial_roots_origin(p, N, j)
                if abs(gm.imag) < 1e-14:   # only exact real roots are hits
                    roots.extend([gm.real, gp.real])
        for root in roots:
            if abs(gamma - root) < margin:
                raise ParameterWindowError(
                    f"gamma = {gamma} within {margin:g} of indicial root {root}"
                )
    report = {}
    finite = []
    for j in range(j_max + 1):
        mm, sdim = _mode_mismatch(model, p, N, j, gamma, gamma_out, profile,
                                  x0, x1, margin)
        report[j] = {"mismatch": mm, "seed_dim": sdim}
        if math.isfinite(mm):
            finite.append(mm)
    min_mm = min(finite) if finite else float("inf")
    return {"per_mode": report, "min_mismatch": min_mm, "gamma": gamma,
            "gamma_out": gamma_out, "model": model}


def model_oscillation_frequency(p, N, x_span=16.0):
    """Oscillation frequency of the mode-0 inverse-square model solutions.

    Integrates v'' + (N-2) v' + A v = 0 (A = p k(p,N)) and extracts the
    frequency from consecutive zero crossings of the oscillating factor;
    the discriminant must be negative (spiral regime).
    """
    Ap = core_potential(p, N)
    disc = (N - 2.0) ** 2 - 4.0 * Ap
    if disc >= 0.0:
        raise ParameterWindowError("mode-0 roots are real: no oscillation to measure")
    rhs = lambda x, y: [y[1], -(N - 2.0) * y[1] - Ap * y[0]]
    sol = solve_ivp(rhs, [0.0, x_span], [1.0, (2.0 - N) / 2.0],
                    rtol=1e-12, atol=1e-14, dense_output=True, method="DOP853")
    xs = np.linspace(0.0, x_span, 40001)
    vs = sol.sol(xs)[0] * np.exp(-(2.0 - N) / 2.0 * xs)   # remove the envelope
    sign = np.sign(vs)
    idx = np.nonzero(np.diff(sign) != 0)[0]
    from scipy.optimize import brentq
    zeros = [brentq(lambda x: sol.sol(x)[0], xs[i], xs[i + 1], xtol=1e-13)
             for i in idx]
    gaps = np.diff(zeros)
    return math.pi / float(np.mean(gaps))


# ---------------------------------------------------------------------------
# appendix stability probe (inverse-square model a-priori estimate)
# ---------------------------------------------------------------------------

def appendix_stability_probe(d, delta, N, levels=(8, 16, 32, 64), r_min=1e-5,
                             j_max=10, guard_distance=0.05):
    """Ratio  ||u||_{L2_delta} / (||f||_{L2_(delta-2)} + ||u||_{L2(B1 \\ B_1/2)})
    for a manufactured solution of  Delta u + d/rho^2 u = f  on B_1, along a
    mesh-refinement sequence.  The ratio must stabilize (bounded estimate).

    delta must stay guard_distance away from every +-delta_j.
    """
    for j in range(j_max + 1):
        dj = delta_exponent(d, N, j)
        if min(abs(delta - dj), abs(delta + dj)) < guard_distance:
            raise ParameterWindowError(
                f"delta = {delta} within {guard_distance} of +-delta_{j} = {dj:.6g}"
            )
    half = (N - 2.0) / 2.0
    disc = half ** 2 - d
    if disc >= 0.0:
        zeta = -half - math.sqrt(disc)      # the more singular admissible branch
        core = lambda r: r ** zeta
        core_d1 = lambda r: zeta * r ** (zeta - 1.0)
        exp0 = zeta
    else:
        om = math.sqrt(-disc)
        core = lambda r: r ** (-half) * np.cos(om * np.log(r))
        core_d1 = lambda r: r ** (-half - 1.0) * (-half * np.cos(om * np.log(r))
                                                  - om * np.sin(om * np.log(r)))
        exp0 = -half
    # u in L2_delta needs 2 exp0 - 2 - 2 delta + N - 1 > -1
    if not (2.0 * exp0 - 2.0 - 2.0 * delta + N - 1.0 > -1.0):
        raise ParameterWindowError(
            f"manufactured core rho^{exp0:.3g} is not in L2_{delta} (pick delta smaller)"
        )
    from .glue import build_cutoff
    chi = build_cutoff(0.75)                 # transition on [0.375, 0.75]
    ratios = []
    for nps in levels:
        mesh = graded_mesh(r_min, 0.5, 1.0, nodes_per_shell=nps, dim=N)
        r = mesh.r
        u = core(r) * chi.value(r)
        # f = Delta(chi u_c) + d chi u_c / rho^2 = 2 chi' u_c' + u_c Delta chi
        lap_chi = chi.d2(r) + (N - 1.0) / r * chi.d1(r)
        f = 2.0 * chi.d1(r) * core_d1(r) + core(r) * lap_chi
        gu = GridFunction(mesh, u)
        gfv = GridFunction(mesh, f)
        num = weighted_l2_norm(gu, delta, N)
        # plain L2 on the outer annulus: weight rho^(-2-2 delta) = 1 at delta = -1
        den = (weighted_l2_norm(gfv, delta - 2.0, N)
               + weighted_l2_norm_region(gu, -1.0, N, 0.5, 1.0))
        ratios.append(num / den if den > 0 else float("nan"))
    ratios = np.array(ratios)
    last = ratios[-3:]
    spread = float(last.max() / last.min()) if np.all(np.isfinite(last)) and last.min() > 0 else float("inf")
    return {"levels": list(levels), "ratios": ratios.tolist(),
            "last_three_spread": spread, "d": d, "delta": delta}
