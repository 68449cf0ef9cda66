"""Singular radial profile of -Delta u = u^p on R^N \\ {0} via the Fowler transform.

With u(r) = r^(-2/(p-1)) w(log r) the radial equation becomes autonomous:

    w'' + (N - 2 - 4/(p-1)) w' - k(p,N) w + w^p = 0.

The singular profile is the heteroclinic connection from the equilibrium
w = c_p (t -> -infinity, i.e. the pure power solution c_p r^(-2/(p-1)))
to w = 0 along the decaying branch w ~ beta e^((2/(p-1)+2-N) t), which is
u ~ beta r^(2-N) at infinity.

Construction: the connection is the stable manifold of the saddle at the
origin flowed backward in time, where the equilibrium (c_p, 0) is attracting
(spiral or node).  A single backward integration from a deep tail seed gives
the orbit with no shooting parameter; a Newton collocation polish on the
output grid then produces a discrete solution whose residual under the
centered second-order Fowler operator is at machine level.

The one-parameter family of Theorem-type uniqueness (one profile per tail
coefficient beta) is exactly the translation orbit in t, so beta is realized
by translating a single canonical connection.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponents import check_window, fowler_constant, k_constant
from .mesh import radial_d1


class ConnectionError_(RuntimeError):
    """Raised when the heteroclinic construction fails to converge."""


def fowler_rhs(w, w_prime, p, N):
    """Second derivative w'' from the autonomous Fowler equation."""
    a = 2.0 / (p - 1.0)
    k = a * (N - 2.0 - a)
    damping = N - 2.0 - 2.0 * a
    return -damping * w_prime + k * w - np.abs(w) ** (p - 1.0) * w


def fowler_exponents(p, N):
    """(a, k, c_p, damping D, tail exponent m_minus, growth exponent m_plus)."""
    a = 2.0 / (p - 1.0)
    k = a * (N - 2.0 - a)
    cp = k ** (1.0 / (p - 1.0))
    return a, k, cp, N - 2.0 - 2.0 * a, a + 2.0 - N, a


@dataclass
class RadialProfile:
    """Discrete Fowler connection plus asymptotics-aware evaluation.

    u(r) = r^(-2/(p-1)) w(log r).  Outside [T-, T+] the evaluation switches
    to the closed-form asymptotics, matched continuously at the grid ends.
    """

    p: float
    N: float
    t_grid: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    core_limit: float           # c_p, the r -> 0 constant of r^(2/(p-1)) u
    tail_coeff: float           # beta, fitted coefficient of e^(m_minus t)
    tail_exponent_fit: float    # fitted tail slope (should be ~ m_minus)
    tail_fit_rel_err: float
    fowler_residual_max: float  # centered-FD residual of the stored arrays
    newton_iterations: int
    _spline: CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        if self._spline is None:
            self._spline = CubicSpline(self.t_grid, self.w)

    @property
    def a_exp(self):
        return 2.0 / (self.p - 1.0)

    @property
    def m_minus(self):
        return self.a_exp + 2.0 - self.N

    def w_at(self, t):
        """w(t) with asymptotic continuation beyond the grid."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        t0, t1 = self.t_grid[0], self.t_grid[-1]
        out = np.empty_like(t)
        left = t < t0
        right = t > t1
        mid = ~(left | right)
        out[mid] = self._spline(t[mid])
        if np.any(left):
            # deviation from c_p contracts at the linearized rate going left
            theta = self.a_exp - (self.N - 2.0) / 2.0
            dev0 = self.w[0] - self.core_limit
            out[left] = self.core_limit + dev0 * np.exp(theta * (t[left] - t0))
        if np.any(right):
            out[right] = self.w[-1] * np.exp(self.m_minus * (t[right] - t1))
        return float(out[0]) if scalar else out

    def w_prime_at(self, t):
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        t0, t1 = self.t_grid[0], self.t_grid[-1]
        out = np.empty_like(t)
        left = t < t0
        right = t > t1
        mid = ~(left | right)
        out[mid] = self._spline(t[mid], 1)
        if np.any(left):
            theta = self.a_exp - (self.N - 2.0) / 2.0
            dev0 = self.w[0] - self.core_limit
            out[left] = theta * dev0 * np.exp(theta * (t[left] - t0))
        if np.any(right):
            out[right] = self.m_minus * self.w[-1] * np.exp(self.m_minus * (t[right] - t1))
        return float(out[0]) if scalar else out

    def u(self, r):
        """u(r) = r^(-a) w(log r) for r > 0."""
        r = np.asarray(r, dtype=float)
        return r ** (-self.a_exp) * self.w_at(np.log(r))

    def u_prime(self, r):
        """u'(r) = r^(-a-1) (w'(log r) - a w(log r))."""
        r = np.asarray(r, dtype=float)
        t = np.log(r)
        return r ** (-self.a_exp - 1.0) * (self.w_prime_at(t) - self.a_exp * self.w_at(t))

    def translate(self, delta_t):
        """Profile with w_new(t) = w(t - delta_t); the tail coefficient scales
        by e^(-m_minus delta_t).  Node values are reused unchanged."""
        return RadialProfile(
            p=self.p, N=self.N,
            t_grid=self.t_grid + delta_t, w=self.w, w_prime=self.w_prime,
            core_limit=self.core_limit,
            tail_coeff=self.tail_coeff * math.exp(-self.m_minus * delta_t),
            tail_exponent_fit=self.tail_exponent_fit,
            tail_fit_rel_err=self.tail_fit_rel_err,
            fowler_residual_max=self.fowler_residual_max,
            newton_iterations=self.newton_iterations,
        )

    def with_tail_coeff(self, beta_target):
        """Translate so that the tail coefficient equals beta_target."""
        if beta_target <= 0:
            raise ValueError("beta_target must be > 0")
        delta = math.log(beta_target / self.tail_coeff) / (-self.m_minus)
        return self.translate(delta)


@dataclass
class ScaledFamily:
    """The scaling family u_eps(x) = eps^(-2/(p-1)) u1(x/eps).

    In Fowler variables scaling is a pure time translation:
    u_eps(r) = r^(-a) w(log(r/eps)).
    """

    base: RadialProfile
    epsilon: float

    def u(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (-self.base.a_exp) * self.base.w_at(np.log(r / self.epsilon))

    def u_prime(self, r):
        r = np.asarray(r, dtype=float)
        t = np.log(r / self.epsilon)
        a = self.base.a_exp
        return r ** (-a - 1.0) * (self.base.w_prime_at(t) - a * self.base.w_at(t))

    @property
    def tail_coeff(self):
        """Far-field coefficient of r^(2-N): scales like eps^(N-2-2/(p-1))."""
        return self.base.tail_coeff * self.epsilon ** (-self.base.m_minus)


def scale_evaluate(family, r):
    """u_eps(r) for a ScaledFamily (asymptotics cover all r > 0)."""
    return family.u(r)


def _backward_orbit(p, N, seed):
    a, k, cp, D, m_minus, _ = fowler_exponents(p, N)
    theta = a - (N - 2.0) / 2.0
    t_back = 25.0 / abs(m_minus) + 40.0 / theta + 20.0

    def rhs(t, y):
        return [y[1], -D * y[1] + k * y[0] - abs(y[0]) ** (p - 1.0) * y[0]]

    sol = solve_ivp(rhs, [0.0, -t_back], [seed, m_minus * seed],
                    rtol=1e-13, atol=1e-16, dense_output=True, method="DOP853")
    if not sol.success:
        raise ConnectionError_(f"backward integration failed: {sol.message}")
    end_dev = abs(sol.y[0, -1] - cp)
    if end_dev > 1e-6 * cp:
        raise ConnectionError_(
            f"backward orbit did not settle at c_p: |w - c_p| = {end_dev:.3e}"
        )
    return sol


def _newton_polish(tau, w0, p, N, w_left, tol=3e-11, itmax=25):
    """Newton iteration for the centered-FD Fowler system on a uniform grid.

    Boundary rows: w(T-) pinned to the orbit value (phase condition) and the
    decaying-branch Robin condition at T+.
    """
    a, k, cp, D, m_minus, _ = fowler_exponents(p, N)
    h = tau[1] - tau[0]
    n = len(tau)
    w = w0.copy()
    res = np.inf
    for it in range(itmax):
        F = np.zeros(n)
        F[0] = w[0] - w_left
        F[1:-1] = ((w[2:] - 2.0 * w[1:-1] + w[:-2]) / h ** 2
                   + D * (w[2:] - w[:-2]) / (2.0 * h)
                   - k * w[1:-1] + np.abs(w[1:-1]) ** (p - 1.0) * w[1:-1])
        F[-1] = (w[-1] - w[-2]) / h - m_minus * (w[-1] + w[-2]) / 2.0
        res = float(np.max(np.abs(F)))
        if res < tol:
            return w, res, it
        main = np.empty(n)
        lo = np.empty(n - 1)
        up = np.empty(n - 1)
        main[0], up[0] = 1.0, 0.0
        main[1:-1] = -2.0 / h ** 2 - k + p * np.abs(w[1:-1]) ** (p - 1.0)
        lo[:-1] = 1.0 / h ** 2 - D / (2.0 * h)
        up[1:] = 1.0 / h ** 2 + D / (2.0 * h)
        main[-1] = 1.0 / h - m_minus / 2.0
        lo[-1] = -1.0 / h - m_minus / 2.0
        J = sp.diags([lo, main, up], [-1, 0, 1], format="csc")
        w = w - spla.spsolve(J, F)
    return w, res, itmax


def solve_connection(p, N, beta_target=1.0, t_minus=-25.0, t_plus=15.0, n_nodes=4001):
    """Compute the heteroclinic profile and translate it to a given tail beta.

    Raises ConnectionError_ with diagnostics if the orbit fails to settle or
    the Newton polish does not reach the residual tolerance.
    """
    check_window(p, N)
    if beta_target <= 0:
        raise ValueError("beta_target must be > 0")
    a, k, cp, D, m_minus, _ = fowler_exponents(p, N)

    seed = min(1e-8, math.exp(m_minus * (t_plus + 3.0)))
    sol = _backward_orbit(p, N, seed)

    # canonical time: w = 1 at tau = 0 (w crosses any level below c_p exactly
    # once on its monotone rise out of the tail)
    level = min(1.0, 0.5 * cp)
    f = lambda t: sol.sol(t)[0] - level
    t_hi, t_lo = 0.0, -1.0
    while f(t_lo) < 0.0:
        t_hi = t_lo
        t_lo -= 1.0
        if t_lo < sol.t[-1]:
            raise ConnectionError_("no crossing of the canonical level found")
    t_star = brentq(f, t_lo, t_hi, xtol=1e-13)
    if t_plus + t_star > 0.0:
        raise ConnectionError_(
            f"orbit too short on the tail side (t* = {t_star:.3f}, T+ = {t_plus})"
        )

    tau = np.linspace(t_minus, t_plus, n_nodes)
    w0 = sol.sol(tau + t_star)[0]
    w, res, its = _newton_polish(tau, w0, p, N, w0[0])
    if res > 1e-8:
        raise ConnectionError_(
            f"Newton polish stalled: residual {res:.3e} after {its} iterations"
        )
    if np.any(w <= 0.0):
        raise ConnectionError_("polished profile lost positivity")

    # tail fit (log-linear) over the last 3 time units
    mask = tau >= t_plus - 3.0
    A = np.vstack([np.ones(mask.sum()), tau[mask]]).T
    coef, *_ = np.linalg.lstsq(A, np.log(w[mask]), rcond=None)
    beta_fit, slope_fit = math.exp(coef[0]), float(coef[1])
    fit = beta_fit * np.exp(slope_fit * tau[mask])
    fit_err = float(np.max(np.abs(fit / w[mask] - 1.0)))

    spline = CubicSpline(tau, w)
    prof = RadialProfile(
        p=p, N=N, t_grid=tau, w=w, w_prime=spline(tau, 1),
        core_limit=cp, tail_coeff=beta_fit, tail_exponent_fit=slope_fit,
        tail_fit_rel_err=fit_err, fowler_residual_max=res,
        newton_iterations=its, _spline=spline,
    )
    return prof.with_tail_coeff(beta_target)


@dataclass
class NormalizationResult:
    profile: RadialProfile      # translated profile u1 with the bound enforced
    lam: float                  # rescaling factor lambda <= 1
    achieved_sup: float         # sup_{s >= 1} s^2 u1^(p-1)(s) after rescaling
    requested_bound: float


def select_normalization(profile, alpha_bound):
    """Smallest rescaling lambda <= 1 with sup_{s>=1} s^2 u^(p-1)(s) <= alpha_bound.

    s^2 u^(p-1)(s) = w^(p-1)(log s), so the rescaling u_lam(x) =
    lam^(-2/(p-1)) u(x/lam) acts as the time shift t -> t - log(lam) and the
    supremum is over t >= -log(lam) >= 0.  The sup tends to 0 as lam -> 0,
    so a solution always exists.
    """
    if alpha_bound <= 0:
        raise ValueError("alpha_bound must be > 0")
    pm1 = profile.p - 1.0
    t_hi = profile.t_grid[-1]
    ts = np.linspace(0.0, max(t_hi, 1.0), 4001)
    g = profile.w_at(ts) ** pm1
    suffix = np.maximum.accumulate(g[::-1])[::-1]
    if suffix[0] <= alpha_bound:
        return NormalizationResult(profile=profile, lam=1.0,
                                   achieved_sup=float(suffix[0]),
                                   requested_bound=alpha_bound)
    idx = np.argmax(suffix <= alpha_bound)
    if suffix[idx] > alpha_bound:
        # beyond the sampled range: pure tail, invert the closed form
        beta = profile.tail_coeff
        s_star = math.log(beta ** pm1 / alpha_bound) / (pm1 * abs(profile.m_minus))
    else:
        # refine the crossing of g(t) = alpha_bound inside [ts[idx-1], ts[idx]]
        f = lambda t: profile.w_at(t) ** pm1 - alpha_bound
        s_star = brentq(f, ts[max(idx - 1, 0)], ts[idx], xtol=1e-12)
    lam = math.exp(-s_star)
    shifted = profile.translate(-s_star)
    ach = float(np.max(shifted.w_at(np.linspace(0.0, max(t_hi, 1.0), 4001)) ** pm1))
    return NormalizationResult(profile=shifted, lam=lam,
                               achieved_sup=ach, requested_bound=alpha_bound)


def pde_residual(u_values, r, p, N):
    """Pointwise discrete residual of -u'' - (N-1)/r u' - u^p.

    ``u_values`` may be an array on the mesh ``r``, a RadialProfile or a
    ScaledFamily (evaluated on ``r``).  Interior nodes use the 3-point
    nonuniform stencil; the end values are copied from their neighbours
    (one-sided second differences are not second-order accurate).
    """
    r = np.asarray(r, dtype=float)
    if hasattr(u_values, "u"):
        u = u_values.u(r)
    else:
        u = np.asarray(u_values, dtype=float)
    from .mesh import derivative_coeffs
    (c1m, c1c, c1p), (c2m, c2c, c2p) = derivative_coeffs(r)
    d1 = c1m * u[:-2] + c1c * u[1:-1] + c1p * u[2:]
    d2 = c2m * u[:-2] + c2c * u[1:-1] + c2p * u[2:]
    res = np.empty_like(u)
    res[1:-1] = -d2 - (N - 1.0) / r[1:-1] * d1 - np.abs(u[1:-1]) ** (p - 1.0) * u[1:-1]
    res[0] = res[1]
    res[-1] = res[-2]
    return res
