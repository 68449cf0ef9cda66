"""Closed-form exponent algebra for point-singular semilinear problems.

Everything in this module is exact arithmetic on the parameters (p, N):
the subcritical window N/(N-2) < p < (N+2)/(N-2), the Fowler constants
k(p,N) and c_p, the inverse-square core potential strength p*k(p,N),
indicial roots of the linearized operator at the origin and at infinity,
admissible weight windows, the appendix decay exponents delta_j, and the
admissibility gate for warped-product (fiber-invariant) reductions.

Conventions
-----------
* Sphere eigenvalues are indexed by *distinct* values lambda_j = j(j+N-2);
  multiplicity is irrelevant to the root formulas.
* Complex indicial roots are carried as complex numbers; all window logic
  uses real parts.
"""

from dataclasses import dataclass, field
import cmath
import math


class ParameterWindowError(ValueError):
    """Raised when (p, N) violates N/(N-2) < p < (N+2)/(N-2) or a related bound."""


#: margin used when checking whether a weight sits on an indicial root
INDICIAL_MARGIN = 1e-9


def check_window(p, N):
    """Validate the subcritical window N/(N-2) < p < (N+2)/(N-2) (strict)."""
    if N < 3:
        raise ParameterWindowError(f"dimension N={N} must be >= 3")
    lo, hi = N / (N - 2.0), (N + 2.0) / (N - 2.0)
    if not (lo < p < hi):
        raise ParameterWindowError(
            f"p={p} violates N/(N-2) < p < (N+2)/(N-2) = ({lo:.6g}, {hi:.6g}) for N={N}"
        )


def k_constant(p, N):
    """k(p,N) = (2/(p-1)) * (N - 2p/(p-1)); positive inside the window."""
    check_window(p, N)
    return 2.0 / (p - 1.0) * (N - 2.0 * p / (p - 1.0))


def fowler_constant(p, N):
    """c_p = k(p,N)^(1/(p-1)), the core blow-up constant of the radial solution."""
    return k_constant(p, N) ** (1.0 / (p - 1.0))


def core_potential(p, N):
    """Strength of the inverse-square potential at the core: p*k(p,N).

    Equals the limit of p * r^2 * u1(r)^(p-1) as r -> 0 for the singular
    radial profile u1.
    """
    return p * k_constant(p, N)


def sphere_eigenvalue(j, N):
    """j-th distinct eigenvalue of the Laplacian on the (N-1)-sphere: j(j+N-2)."""
    if j < 0:
        raise ValueError(f"mode index j={j} must be >= 0")
    return float(j) * (j + N - 2.0)


def indicial_roots_origin(p, N, j):
    """Indicial roots at the origin of the linearization around the singular profile.

    gamma_j^{+-} = (1/2) [2-N +- sqrt((N-2)^2 + 4(lambda_j - p k(p,N)))].

    Returns (gamma_minus, gamma_plus, degenerate): complex roots ordered by
    real part (minus first); ``degenerate`` is True when the discriminant
    vanishes (double root).
    """
    Ap = core_potential(p, N)
    lam = sphere_eigenvalue(j, N)
    disc = (N - 2.0) ** 2 + 4.0 * (lam - Ap)
    sq = cmath.sqrt(complex(disc, 0.0))
    g_plus = 0.5 * ((2.0 - N) + sq)
    g_minus = 0.5 * ((2.0 - N) - sq)
    degenerate = abs(disc) < 1e-12 * max(1.0, (N - 2.0) ** 2)
    return g_minus, g_plus, degenerate


def indicial_roots_infinity(N, j):
    """Indicial roots at infinity (the potential decays, so they are Laplacian roots).

    gamma~_j^{+-} = (1/2) [2-N +- sqrt((N-2)^2 + 4 lambda_j)]; always real.
    """
    lam = sphere_eigenvalue(j, N)
    sq = math.sqrt((N - 2.0) ** 2 + 4.0 * lam)
    return 0.5 * ((2.0 - N) - sq), 0.5 * ((2.0 - N) + sq)


def delta_exponent(d, N, j):
    """Appendix decay exponent delta_j = Re sqrt(((N-2)/2)^2 + lambda_j - d)."""
    lam = sphere_eigenvalue(j, N)
    val = ((N - 2.0) / 2.0) ** 2 + lam - d
    return cmath.sqrt(complex(val, 0.0)).real


@dataclass
class WeightWindow:
    """Open interval for the core weight nu; the outer weight is mu = 2-N-nu."""

    nu_lo: float
    nu_hi: float
    p: float
    N: float

    def mu_for(self, nu):
        return 2.0 - self.N - nu

    def contains(self, nu):
        return self.nu_lo < nu < self.nu_hi

    def validate(self, nu, mu):
        """Check the full inequality chain for a (nu, mu) pair.

        -2/(p-1) < nu < min(-2/(p-1)+1, Re gamma_0^-) <= (2-N)/2
                 <= Re gamma_0^+ < mu < 0,   with mu + nu = 2 - N exactly.
        """
        p, N = self.p, self.N
        g_minus, g_plus, _ = indicial_roots_origin(p, N, 0)
        x = -2.0 / (p - 1.0)
        checks = [
            (x < nu, f"-2/(p-1) = {x:.6g} < nu = {nu:.6g}"),
            (nu < self.nu_hi, f"nu = {nu:.6g} < min(-2/(p-1)+1, Re gamma_0^-) = {self.nu_hi:.6g}"),
            (self.nu_hi <= (2.0 - N) / 2.0 + 1e-15,
             f"min(...) = {self.nu_hi:.6g} <= (2-N)/2 = {(2.0 - N) / 2.0:.6g}"),
            (g_plus.real < mu, f"Re gamma_0^+ = {g_plus.real:.6g} < mu = {mu:.6g}"),
            (mu < 0.0, f"mu = {mu:.6g} < 0"),
            (abs(mu + nu - (2.0 - N)) < 1e-12, f"mu + nu = {mu + nu:.6g} == 2-N = {2.0 - N:.6g}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterWindowError("weight window violated: " + msg)
        return True


def weight_window(p, N):
    """Admissible open interval for nu: (-2/(p-1), min(-2/(p-1)+1, Re gamma_0^-))."""
    check_window(p, N)
    g_minus, _, _ = indicial_roots_origin(p, N, 0)
    lo = -2.0 / (p - 1.0)
    hi = min(lo + 1.0, g_minus.real)
    if not lo < hi:
        raise ParameterWindowError(f"empty weight window for (p={p}, N={N})")
    return WeightWindow(nu_lo=lo, nu_hi=hi, p=p, N=N)


@dataclass
class IndicialEntry:
    j: int
    lam: float
    gamma_minus: complex
    gamma_plus: complex
    gamma_inf_minus: float
    gamma_inf_plus: float
    delta: float
    degenerate: bool


@dataclass
class IndicialTable:
    """Per-mode indicial data for (p, N), with the core potential strength."""

    p: float
    N: float
    core_strength: float            # p * k(p,N), coefficient of 1/r^2 at the core
    d_shift: float                  # shift used for the delta_j column
    entries: list = field(default_factory=list)

    def entry(self, j):
        return self.entries[j]

    def real_roots(self):
        """All real parts of origin roots (used for weight-placement guards)."""
        vals = []
        for e in self.entries:
            vals.extend([e.gamma_minus.real, e.gamma_plus.real])
        return vals

    def guard_weight(self, gamma, margin=INDICIAL_MARGIN):
        """Raise if gamma sits within ``margin`` of a real origin root."""
        for e in self.entries:
            for root in (e.gamma_minus, e.gamma_plus):
                if abs(root.imag) < 1e-14 and abs(gamma - root.real) < margin:
                    raise ParameterWindowError(
                        f"weight {gamma} coincides with indicial root {root.real} "
                        f"of mode j={e.j} (margin {margin:g})"
                    )


def indicial_table(p, N, j_max=10, d_shift=0.0):
    """Tabulate indicial data for modes 0..j_max."""
    check_window(p, N)
    entries = []
    for j in range(j_max + 1):
        gm, gp, deg = indicial_roots_origin(p, N, j)
        tm, tp = indicial_roots_infinity(N, j)
        entries.append(IndicialEntry(
            j=j, lam=sphere_eigenvalue(j, N),
            gamma_minus=gm, gamma_plus=gp,
            gamma_inf_minus=tm, gamma_inf_plus=tp,
            delta=delta_exponent(d_shift, N, j),
            degenerate=deg,
        ))
    return IndicialTable(p=p, N=N, core_strength=core_potential(p, N),
                         d_shift=d_shift, entries=entries)


@dataclass
class EquivariantSpec:
    """Reduction of an (N+k)-dimensional critical problem to N dimensions."""

    n: int
    k: int
    N: int
    p: float
    crit_exponent: float            # 2*_{n,k} = 2(n-k)/(n-k-2)
    admissible: bool


def equivariant_params(n, k):
    """Reduced dimension/exponent for a k-dimensional fiber inside dimension n.

    N = n - k, p = (n+2)/(n-2); admissible iff 0 < k < (n-2)/2, which places
    p strictly inside the reduced window for N.
    """
    if n < 3:
        raise ParameterWindowError(f"total dimension n={n} must be >= 3")
    if k < 1:
        raise ParameterWindowError(f"fiber dimension k={k} must be >= 1")
    N = n - k
    if N <= 2:
        raise ParameterWindowError(f"reduced dimension n-k={N} must be >= 3")
    p = (n + 2.0) / (n - 2.0)
    crit = 2.0 * (n - k) / (n - k - 2.0)
    admissible = 0 < k < (n - 2.0) / 2.0
    return EquivariantSpec(n=n, k=k, N=N, p=p, crit_exponent=crit, admissible=admissible)


@dataclass
class ProblemParams:
    """Global configuration shared by every module.

    Invariants are enforced at construction: the subcritical window, the
    geometric ordering 0 < epsilon < sigma/2 < sigma < R, the weight window
    with mu + nu = 2 - N, and alpha_holder <= p - 1.
    """

    N: int
    p: float
    epsilon: float
    sigma: float
    R: float
    nu: float
    beta: float = 1.0
    alpha_holder: float = 0.0
    mu: float = None

    def __post_init__(self):
        check_window(self.p, self.N)
        if self.mu is None:
            self.mu = 2.0 - self.N - self.nu
        if not (0.0 < self.epsilon < self.sigma / 2.0 < self.sigma < self.R):
            raise ParameterWindowError(
                f"need 0 < epsilon={self.epsilon} < sigma/2 < sigma={self.sigma} < R={self.R}"
            )
        if self.beta <= 0.0:
            raise ParameterWindowError(f"beta={self.beta} must be > 0")
        if not (0.0 <= self.alpha_holder <= self.p - 1.0):
            raise ParameterWindowError(
                f"alpha_holder={self.alpha_holder} violates 0 <= alpha <= p-1 = {self.p - 1.0:.6g}"
            )
        win = weight_window(self.p, self.N)
        win.validate(self.nu, self.mu)
        tab = indicial_table(self.p, self.N, j_max=10)
        tab.guard_weight(self.nu)
        tab.guard_weight(self.mu)

    @property
    def a_exp(self):
        """Core blow-up exponent 2/(p-1)."""
        return 2.0 / (self.p - 1.0)

    @property
    def q_exponent(self):
        """Decay rate q = min(N - 2p/(p-1), 1 - nu - 2/(p-1)) of the glue error."""
        return min(self.N - 2.0 * self.p / (self.p - 1.0), 1.0 - self.nu - self.a_exp)
