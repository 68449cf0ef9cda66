"""Fixed-point engine: iterate v -> -G[f_eps + Q(v)] inside the weighted ball.

The ball radius is M eps^q with M auto-calibrated from the measured first
step (M = ball_factor * ||G f_eps|| / eps^q, default factor 4, matching the
requirement M > 2 C0).  The iteration aborts on ball escape and on three
consecutive non-contracting steps; convergence is declared when the
increment norm falls below a relative tolerance.

Contraction accounting uses the alpha = 0 weighted C^2_nu norm; the
alpha > 0 ledger is diagnostic.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .exponents import ParameterWindowError
from .glue import build_cutoff, build_glue, nonlinearity_Q
from .mesh import GridFunction
from .modes import (
    GreenSolver, check_normalization, coercivity_constant, solver_mesh,
)
from .norms import weighted_holder_norm
from .radial import ScaledFamily


class BallEscapeError(RuntimeError):
    """An iterate left the ball ||v|| <= M eps^q."""


class NonContractionError(RuntimeError):
    """Three consecutive steps failed to contract."""


@dataclass
class IterationState:
    params: object
    v: GridFunction
    u_bar: GridFunction
    f_eps: GridFunction
    f_norm: float
    M: float
    C0: float
    ball_radius: float
    d_history: list
    c_history: list
    v_norms: list
    iterations: int
    converged: bool
    residual_norm: float
    residual_rel: float
    positivity_margin: float
    coercivity_c0: float
    normalization_margin: float
    holder_ledger: dict = field(default_factory=dict)

    @property
    def u(self):
        return GridFunction(self.u_bar.mesh, self.u_bar.values + self.v.values)


def _norm2(gf, nu, m_shell):
    return weighted_holder_norm(gf, k=2, alpha=0.0, nu=nu, m_shell=m_shell).total


def iterate(params, coeffs, profile, mesh=None, M=None, tol=1e-10, max_iter=40,
            ball_factor=4.0, m_shell=18, cutoff=None, check_preconditions=True,
            nodes_per_shell=16, r_min_factor=1e-3, holder_alpha=None):
    """Run the contraction iteration at one epsilon; returns IterationState.

    Raises BallEscapeError / NonContractionError with diagnostics when the
    configuration is outside the contracting regime (epsilon too large or M
    too small), and NormalizationError when the profile normalization
    precondition fails.
    """
    if mesh is None:
        mesh = solver_mesh(params, nodes_per_shell=nodes_per_shell,
                           r_min_factor=r_min_factor)
    c0 = coercivity_constant(coeffs, mesh, params.N)
    norm_margin = None
    if check_preconditions:
        norm_margin = check_normalization(params, coeffs, profile, c0)
    chi = build_cutoff(params.sigma) if cutoff is None else cutoff
    glue = build_glue(params, coeffs, profile, mesh, cutoff=chi, m_shell=m_shell)
    solver = GreenSolver(params, coeffs, glue.u_bar.values, mesh)
    nu, q, eps, p = params.nu, params.q_exponent, params.epsilon, params.p

    gf0 = solver.solve(glue.f_eps)
    v1 = GridFunction(mesh, -gf0.values)
    n1 = _norm2(v1, nu, m_shell)
    C0 = n1 / eps ** q
    if M is None:
        M = ball_factor * C0
    ball = M * eps ** q
    if n1 > ball:
        raise BallEscapeError(
            f"first step ||G f_eps|| = {n1:.4g} > M eps^q = {ball:.4g}: "
            f"epsilon too large for this M (increase M or decrease epsilon)"
        )

    v = v1
    d_hist = [n1]                 # d_0 = ||v_1 - 0||
    c_hist = []
    v_norms = [n1]
    converged = False
    bad_streak = 0
    it = 0
    for it in range(1, max_iter + 1):
        Q = nonlinearity_Q(v, glue.u_bar, coeffs, p)
        rhs = GridFunction(mesh, glue.f_eps.values + Q.values)
        v_next = GridFunction(mesh, -solver.solve(rhs).values)
        d = _norm2(v_next - v, nu, m_shell)
        n_next = _norm2(v_next, nu, m_shell)
        if n_next > ball:
            raise BallEscapeError(
                f"iterate {it}: ||v|| = {n_next:.4g} escaped the ball {ball:.4g} "
                f"(M = {M:.4g}, eps = {eps:g}); suggest larger M or smaller eps"
            )
        d_hist.append(d)
        v_norms.append(n_next)
        if len(d_hist) >= 2 and d_hist[-2] > 0:
            c = d / d_hist[-2]
            c_hist.append(c)
            bad_streak = bad_streak + 1 if c >= 1.0 else 0
            if bad_streak >= 3:
                raise NonContractionError(
                    f"three consecutive non-contracting steps at eps = {eps:g}: "
                    f"c_k tail = {c_hist[-3:]}"
                )
        v = v_next
        if d <= tol * max(n_next, 1e-300):
            converged = True
            break

    # full nonlinear residual via the exact identity
    # div(a grad u) - a h u + a |u|^p = L v + f_eps + Q(v)
    Qf = nonlinearity_Q(v, glue.u_bar, coeffs, p)
    op = solver.op(0)
    Lv = np.zeros(mesh.n)
    Lv[1:-1] = op.a_values[1:-1] * (op.matrix @ v.values)[1:-1]
    res_vals = Lv + glue.f_eps.values + Qf.values
    res_vals[0] = 0.0
    res_vals[-1] = 0.0
    res = GridFunction(mesh, res_vals)
    res_norm = weighted_holder_norm(res, k=0, alpha=0.0, nu=nu - 2.0,
                                    m_shell=m_shell).total
    res_rel = res_norm / glue.f_norm if glue.f_norm > 0 else res_norm

    u_vals = glue.u_bar.values + v.values
    pos_margin = float(np.min(u_vals[:-1]))     # interior + inner edge (u(R) = 0)

    ledger = {}
    if holder_alpha:
        ledger[f"v_norm_2_{holder_alpha}"] = weighted_holder_norm(
            v, k=2, alpha=holder_alpha, nu=nu, m_shell=m_shell).total

    return IterationState(
        params=params, v=v, u_bar=glue.u_bar, f_eps=glue.f_eps,
        f_norm=glue.f_norm, M=M, C0=C0, ball_radius=ball,
        d_history=d_hist, c_history=c_hist, v_norms=v_norms,
        iterations=it, converged=converged,
        residual_norm=res_norm, residual_rel=res_rel,
        positivity_margin=pos_margin, coercivity_c0=c0,
        normalization_margin=norm_margin, holder_ledger=ledger,
    )


def solution_report(state, profile, depths=(1e-2, 1e-3, 1e-4)):
    """Blow-up diagnostics of the assembled solution u = ubar + v.

    * core ratio rho^(2/(p-1)) u(rho) / c_p at rho = eps * depth (below the
      mesh floor, v is extrapolated along its weight ray and is negligible);
    * positivity certificate;
    * fitted slope of log(|v|/ubar) in the core (should be ~ nu + 2/(p-1) > 0).
    """
    if not state.converged:
        raise RuntimeError("solution_report requires a converged state")
    params = state.params
    eps, p, nu = params.epsilon, params.p, params.nu
    a_exp = params.a_exp
    mesh = state.u_bar.mesh
    fam = ScaledFamily(profile, eps)
    cp = profile.core_limit
    core = {}
    for depth in depths:
        rho = eps * depth
        ub = float(fam.u(rho))          # chi = 1 this deep
        if rho >= mesh.r_min:
            vv = float(np.interp(rho, mesh.r, state.v.values))
        else:
            vv = float(state.v.values[0]) * (rho / mesh.r_min) ** nu
        core[depth] = (rho ** a_exp) * (ub + vv) / cp
    r = mesh.r
    sel = (r >= mesh.r_min) & (r <= eps / 10.0)
    ratio = np.abs(state.v.values[sel]) / np.maximum(state.u_bar.values[sel], 1e-300)
    good = ratio > 0
    slope = float(np.polyfit(np.log(r[sel][good]), np.log(ratio[good]), 1)[0]) \
        if np.count_nonzero(good) > 3 else float("nan")
    return {
        "core_ratio": core,
        "core_limit": cp,
        "positivity_margin": state.positivity_margin,
        "positive_everywhere": bool(state.positivity_margin > 0.0),
        "v_to_ubar_slope": slope,
        "expected_slope": nu + a_exp,
        "residual_norm": state.residual_norm,
        "residual_rel": state.residual_rel,
        "v_norm": state.v_norms[-1],
        "ball_radius": state.ball_radius,
        "M": state.M,
        "iterations": state.iterations,
        "contraction_factors": state.c_history,
    }


def _random_ball_element(mesh, nu, radius, rng, m_shell):
    """Random smooth radial v with ||v||_{2,0,nu} = radius * U(0.3, 1)."""
    r = mesh.r
    x = np.log(r)
    c = rng.standard_normal(4)
    smooth = c[0] + c[1] * np.sin(x / 3.0) + c[2] * np.cos(x / 4.0) + c[3] * np.sin(x / 6.0)
    shape = np.minimum(r, mesh.sigma) ** nu * smooth * (1.0 - r / mesh.R)
    gf = GridFunction(mesh, shape)
    n = _norm2(gf, nu, m_shell)
    if n == 0.0:
        return None
    scale = radius * rng.uniform(0.3, 1.0) / n
    return GridFunction(mesh, gf.values * scale)


def contraction_factor_sweep(base_params, coeffs, profile, eps_list, pairs=6,
                             seed=0, m_shell=18, nodes_per_shell=16,
                             r_min_factor=1e-3):
    """Empirical Lipschitz factor of v -> G Q(v) on the ball, per epsilon.

    M is calibrated once at the largest epsilon and reused, so the reported
    ball is the uniform one.  Returns a list of row dicts (largest eps first).
    """
    from dataclasses import replace
    eps_sorted = sorted(eps_list, reverse=True)
    rows = []
    M = None
    rng = np.random.default_rng(seed)
    for eps in eps_sorted:
        params = replace(base_params, epsilon=eps)
        mesh = solver_mesh(params, nodes_per_shell=nodes_per_shell,
                           r_min_factor=r_min_factor)
        glue = build_glue(params, coeffs, profile, mesh, m_shell=m_shell)
        solver = GreenSolver(params, coeffs, glue.u_bar.values, mesh)
        gf0 = solver.solve(glue.f_eps)
        C0 = _norm2(gf0, params.nu, m_shell) / eps ** params.q_exponent
        if M is None:
            M = 4.0 * C0
        ball = M * eps ** params.q_exponent
        worst = 0.0
        for _ in range(pairs):
            v1 = _random_ball_element(mesh, params.nu, ball, rng, m_shell)
            v2 = _random_ball_element(mesh, params.nu, ball, rng, m_shell)
            if v1 is None or v2 is None:
                continue
            dv = _norm2(v1 - v2, params.nu, m_shell)
            if dv == 0.0:
                continue
            q1 = nonlinearity_Q(v1, glue.u_bar, coeffs, params.p)
            q2 = nonlinearity_Q(v2, glue.u_bar, coeffs, params.p)
            gq = solver.solve(GridFunction(mesh, q1.values - q2.values))
            worst = max(worst, _norm2(gq, params.nu, m_shell) / dv)
        rows.append({"epsilon": eps, "factor": worst, "ball_radius": ball,
                     "C0": C0, "M": M})
    return rows
