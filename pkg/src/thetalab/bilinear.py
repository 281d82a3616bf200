"""Bilinear KP-type forms evaluated on theta jets.

Every residual here is *term-sum normalized*: the defining combination is
split into its constituent bilinear (or trilinear) monomials, evaluated on
the stored (scale-factored) jet numbers, and the absolute value of the sum
is divided by the sum of the absolute values of the monomials.  Each
monomial in a given combination carries the same exponential prefactor
exp(k * scale_exponent), so the prefactor cancels exactly in the ratio and
is never materialized; normalized residuals always lie in [0, 1].

Substituted directions are folded: the second-direction change D2 -> D2 +
const * D1 is applied to the direction vector itself before any theta
evaluation, so the substituted and unsubstituted forms agree bit-for-bit,
not merely algebraically.  If every monomial of a combination is exactly
zero (zero directions and zero constants), the residual is 0 by convention;
a normalizer that underflows while the terms are not all exactly zero is a
degenerate sample and raises.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    AbelianPoint,
    RiemannMatrix,
    as_point,
    theta_eval,
)
from .errors import (
    DegenerateJetError,
    DegenerateSampleError,
    InvalidInputError,
    NotOnDivisorError,
    PoleError,
)

NORMALIZER_FLOOR = 1e-300
DIVISOR_REL_TOL = 1e-8
POLE_REL_TOL = 1e-10
GAUGE_DEGENERATE_TOL = 1e-6


def as_riemann_matrix(tau) -> RiemannMatrix:
    if isinstance(tau, RiemannMatrix):
        return tau
    return RiemannMatrix(tau)


def _vec(x, g: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=complex).reshape(-1)
    if arr.shape != (g,):
        raise InvalidInputError(f"{what} must be a complex vector of length {g}")
    return arr


@dataclass
class DirectionJet:
    """Directions and constants defining the KP-type forms.

    U, V, W are the directions of the first, second and third derivative
    operators; c is the additive constant of the u-field / one-point form,
    d the constant of the four-term bilinear KP form.  A and B are the
    exponent coefficients of the exponential-dressed form; zeta_coeffs and
    d_coeffs are the series coefficients of the shift germ zeta(eps) and of
    d(eps) = d_3 eps^3 + d_4 eps^4 + ... used by the truncated hierarchy.
    """

    U: np.ndarray
    V: np.ndarray | None = None
    W: np.ndarray | None = None
    c: complex | None = None
    d: complex | None = None
    A: complex | None = None
    B: complex | None = None
    zeta_coeffs: list | None = None
    d_coeffs: list | None = None
    normalized: bool = False

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=complex).reshape(-1)
        g = len(self.U)
        if self.V is not None:
            self.V = _vec(self.V, g, "V")
        if self.W is not None:
            self.W = _vec(self.W, g, "W")
        for name in ("c", "d", "A", "B"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, complex(val))
        if self.zeta_coeffs is not None:
            self.zeta_coeffs = [_vec(zc, g, "zeta coefficient") for zc in self.zeta_coeffs]
        if self.d_coeffs is not None:
            self.d_coeffs = [complex(x) for x in self.d_coeffs]

    @property
    def g(self) -> int:
        return len(self.U)

    def require(self, *names) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise InvalidInputError(f"direction jet is missing {', '.join(missing)}")

    def zeta(self, epsilon: complex) -> np.ndarray:
        """The truncated germ zeta(eps) = sum_k zeta_coeffs[k-1] * eps^k."""
        self.require("zeta_coeffs")
        if not self.zeta_coeffs:
            raise InvalidInputError("zeta_coeffs must have at least one entry")
        total = np.zeros(self.g, dtype=complex)
        power = 1.0 + 0.0j
        for coeff in self.zeta_coeffs:
            power *= epsilon
            total = total + power * coeff
        return total

    def d_of(self, epsilon: complex) -> complex:
        """d(eps) = d_3 eps^3 + d_4 eps^4 + ... (zero when no coefficients)."""
        if not self.d_coeffs:
            return 0.0 + 0.0j
        total = 0.0 + 0.0j
        power = epsilon**2
        for coeff in self.d_coeffs:
            power *= epsilon
            total += coeff * power
        return total


def gauge_rescale(jet: DirectionJet, lam: complex) -> DirectionJet:
    """The scaling (U, V, W, c, d) -> (lam U, lam^2 V, lam^3 W, lam^2 c, lam^4 d).

    The four-term bilinear KP residual and the one-point residual are both
    invariant under it (every monomial of each combination is homogeneous of
    one fixed degree in lam); used to bring U to the normalized gauge and to
    balance direction norms for finite-difference grids.
    """
    lam = complex(lam)
    return replace(
        jet,
        U=lam * jet.U,
        V=None if jet.V is None else lam**2 * jet.V,
        W=None if jet.W is None else lam**3 * jet.W,
        c=None if jet.c is None else lam**2 * jet.c,
        d=None if jet.d is None else lam**4 * jet.d,
        normalized=False,
    )


def gauge_balance(jet: DirectionJet) -> DirectionJet:
    """Rescale so every direction norm is at most 1 (unit-normalized grid).

    Finite-difference stencils sample the u-field at literal (x, y, t) steps;
    a direction of norm s makes the effective theta-argument step s times the
    grid step, ruining the stencil order.  The scaling symmetry of
    ``gauge_rescale`` lets the norms be balanced without changing any
    residual: lam = 1 / max(|U|, |V|^(1/2), |W|^(1/3), 1).
    """
    worst = max(float(np.linalg.norm(jet.U)), 1.0)
    if jet.V is not None:
        worst = max(worst, float(np.linalg.norm(jet.V)) ** 0.5)
    if jet.W is not None:
        worst = max(worst, float(np.linalg.norm(jet.W)) ** (1.0 / 3.0))
    return gauge_rescale(jet, 1.0 / worst)


def gauge_normalize(jet: DirectionJet) -> DirectionJet:
    """Rescale so |U| = 1 with the first nonzero component real positive."""
    norm = float(np.linalg.norm(jet.U))
    if norm < GAUGE_DEGENERATE_TOL:
        raise DegenerateJetError(f"direction U has norm {norm:.3e}; gauge undefined")
    lead = 0.0 + 0.0j
    for x in jet.U:
        if abs(x) > 1e-12 * norm:
            lead = complex(x)
            break
    phase = lead / abs(lead) if lead != 0 else 1.0 + 0.0j
    out = gauge_rescale(jet, 1.0 / (norm * phase))
    out.normalized = True
    return out


def _term_ratio(terms) -> float:
    total = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    normalizer = math.fsum(abs(t) for t in terms)
    if normalizer == 0.0:
        return 0.0
    if normalizer < NORMALIZER_FLOOR:
        raise DegenerateSampleError(
            f"term-sum normalizer underflowed ({normalizer:.3e}); resample"
        )
    return min(abs(total) / normalizer, 1.0)


def hirota_residual(z, tau, jet: DirectionJet) -> float:
    """Normalized residual of the four-term bilinear KP form at z.

    The eight monomials D1^4 T*T - 4 D1^3 T*D1 T + 3 (D1^2 T)^2
    + 3 D2^2 T*T - 3 (D2 T)^2 - 3 D1D3 T*T + 3 D3 T*D1 T - d T*T
    are evaluated from a single jet and term-sum normalized.
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V", "W", "d")
    U, V, W = jet.U, jet.V, jet.W
    j = theta_eval(
        as_point(z).z, rm,
        [(U, U, U, U), (U, U, U), (U, U), (U,), (V, V), (V,), (U, W), (W,)],
    )
    t = j.value
    terms = (
        j.d((U, U, U, U)) * t,
        -4.0 * j.d((U, U, U)) * j.d((U,)),
        3.0 * j.d((U, U)) ** 2,
        3.0 * j.d((V, V)) * t,
        -3.0 * j.d((V,)) ** 2,
        -3.0 * j.d((U, W)) * t,
        3.0 * j.d((W,)) * j.d((U,)),
        -jet.d * t * t,
    )
    return _term_ratio(terms)


def _one_point_terms(z, rm, U, V, c, a):
    """The six monomials of the one-point form, from exactly two engine calls."""
    zv = as_point(z).z
    av = _vec(a, rm.g, "a")
    requests = [(U, U), (U,), (V,)]
    jz = theta_eval(zv, rm, requests)
    ja = theta_eval(zv + av, rm, requests)
    t, ta = jz.value, ja.value
    return (
        jz.d((U, U)) * ta,
        t * ja.d((U, U)),
        jz.d((V,)) * ta,
        -t * ja.d((V,)),
        -2.0 * jz.d((U,)) * ja.d((U,)),
        c * t * ta,
    )


def p_residual(z, tau, jet: DirectionJet, a) -> float:
    """Normalized residual of the one-point bilinear form at z with shift a.

    D1^2 T*T_a + T*D1^2 T_a + D2 T*T_a - T*D2 T_a - 2 D1 T*D1 T_a + c T*T_a,
    T_a(z) = T(z + a), term-sum normalized over the six monomials.
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V", "c")
    return _term_ratio(_one_point_terms(z, rm, jet.U, jet.V, jet.c, a))


def p_AB_residual(z, tau, jet: DirectionJet, a) -> float:
    """Normalized residual of the exponential-dressed one-point form.

    The 2A cross monomials are folded into the second direction (V - 2A*U)
    and the constant becomes A^2 - B, which reproduces the dressed
    combination exactly; see the module docstring on folding.
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V", "A", "B")
    v_eff = jet.V - 2.0 * jet.A * jet.U
    c_eff = jet.A**2 - jet.B
    return _term_ratio(_one_point_terms(z, rm, jet.U, v_eff, c_eff, a))


def hierarchy_residual(z, tau, jet: DirectionJet, epsilon: complex) -> float:
    """Normalized residual of the truncated hierarchy form at order eps.

    With a = 2*zeta(eps), the combination

        eps*(D1^2 T*T_a + T*D1^2 T_a + D2 T*T_a - T*D2 T_a - 2 D1 T*D1 T_a)
        + D1 T*T_a - T*D1 T_a + d(eps) T*T_a

    equals eps times the one-point form with second direction V + U/eps and
    constant d(eps)/eps; the eps factor cancels in the normalized ratio, so
    the residual is computed through that folded form.  At eps = 0 the
    combination collapses to D1 T*T - T*D1 T = 0 and the residual is 0.
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V", "zeta_coeffs")
    epsilon = complex(epsilon)
    if abs(epsilon) >= 1.0:
        raise InvalidInputError("hierarchy parameter must satisfy |epsilon| < 1")
    if epsilon == 0.0:
        return 0.0
    a = 2.0 * jet.zeta(epsilon)
    v_eff = jet.V + jet.U / epsilon
    c_eff = jet.d_of(epsilon) / epsilon
    return _term_ratio(_one_point_terms(z, rm, jet.U, v_eff, c_eff, a))


def longeq_residual(z_on_theta, tau, jet: DirectionJet) -> float:
    """Normalized residual of the on-divisor identity at a theta zero.

    Evaluates the six degree-three monomials

        -D1^2 T (D2 T)^2 + 2 D1D2 T D2 T D1 T - D2^2 T (D1 T)^2
        + (D1^2 T)^3 - 2 D1^2 T D1^3 T D1 T + D1^4 T (D1 T)^2

    (left side minus right side of the identity), term-sum normalized.
    The point must lie on the theta divisor: |T| <= 1e-8 of the local
    series scale, else NotOnDivisorError.
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V")
    U, V = jet.U, jet.V
    j = theta_eval(
        as_point(z_on_theta).z, rm,
        [(U,), (V,), (U, U), (U, V), (V, V), (U, U, U), (U, U, U, U)],
    )
    local = j.abs_sum(())
    if abs(j.value) > DIVISOR_REL_TOL * local:
        raise NotOnDivisorError(
            f"|theta| = {abs(j.value):.3e} exceeds {DIVISOR_REL_TOL:.0e} of the "
            f"local scale {local:.3e}; not a divisor point"
        )
    d1, d2 = j.d((U,)), j.d((V,))
    d11, d12, d22 = j.d((U, U)), j.d((U, V)), j.d((V, V))
    d111, d1111 = j.d((U, U, U)), j.d((U, U, U, U))
    terms = (
        -d11 * d2 * d2,
        2.0 * d12 * d2 * d1,
        -d22 * d1 * d1,
        d11**3,
        -2.0 * d11 * d111 * d1,
        d1111 * d1 * d1,
    )
    return _term_ratio(terms)


def kp_field_u(x: float, y: float, t: float, z, tau, jet: DirectionJet) -> complex:
    """The scalar field u = 2 * (log T)'' along U, plus c, at xU + yV + tW + z.

    Computed analytically as 2*(D1^2 T*T - (D1 T)^2)/T^2 + c on stored jet
    numbers (the exponential scale cancels in the ratio).
    """
    rm = as_riemann_matrix(tau)
    jet.require("U", "V", "W", "c")
    arg = x * jet.U + y * jet.V + t * jet.W + as_point(z).z
    j = theta_eval(arg, rm, [(jet.U,), (jet.U, jet.U)])
    if abs(j.value) <= POLE_REL_TOL * j.abs_sum(()):
        raise PoleError(
            f"theta vanishes at the grid argument (|T| = {abs(j.value):.3e}); u has a pole"
        )
    d1, d11 = j.d((jet.U,)), j.d((jet.U, jet.U))
    return 2.0 * (d11 * j.value - d1 * d1) / (j.value * j.value) + jet.c


def baker_akhiezer(x: float, y: float, z, tau, jet: DirectionJet, a, A, B) -> complex:
    """exp(Ax + By) * T(xU + yV + a + z) / T(xU + yV + z)."""
    rm = as_riemann_matrix(tau)
    jet.require("U", "V")
    av = _vec(a, rm.g, "a")
    base = x * jet.U + y * jet.V + as_point(z).z
    num = theta_eval(base + av, rm)
    den = theta_eval(base, rm)
    if abs(den.value) <= POLE_REL_TOL * den.abs_sum(()):
        raise PoleError(
            f"theta vanishes at the denominator argument (|T| = {abs(den.value):.3e})"
        )
    ratio = math.exp(num.scale_exponent - den.scale_exponent) * (num.value / den.value)
    return cmath.exp(complex(A) * x + complex(B) * y) * ratio


def kp_standard_time_direction(jet: DirectionJet) -> DirectionJet:
    """Convert the bilinear-form time direction to the literal-PDE one.

    The four-term bilinear fit determines a direction W in which the
    log-second-derivative field satisfies the PDE only up to a time
    rescaling and a Galilean shift proportional to the constant c.  The
    returned jet has W replaced by (3/4) W + (3/2) c U, in which the field
    u = 2 (log T)'' + c satisfies 3 u_yy = d/dx (4 u_t - 6 u u_x - u_xxx)
    on literal (x, y, t) grids.
    """
    jet.require("U", "W")
    c = 0.0 if jet.c is None else jet.c
    return replace(jet, W=0.75 * jet.W + 1.5 * c * jet.U)


@dataclass
class ResidualReport:
    """Aggregated residual sweep over sample points.

    ``passed`` is True exactly when max_residual <= tolerance (serialized
    under the key "pass").  ``note`` flags vacuous or partial sweeps.
    """

    sample_points: list
    residuals: list
    normalization: str
    max_residual: float
    mean_residual: float
    tolerance: float
    passed: bool
    note: str | None = None


def build_report(points, residuals, tolerance: float,
                 normalization: str = "term-sum", note: str | None = None) -> ResidualReport:
    residuals = [float(r) for r in residuals]
    if residuals:
        max_r = max(residuals)
        mean_r = math.fsum(residuals) / len(residuals)
    else:
        max_r = 0.0
        mean_r = 0.0
        note = note or "vacuous: no sample points"
    return ResidualReport(
        sample_points=[as_point(p) for p in points],
        residuals=residuals,
        normalization=normalization,
        max_residual=max_r,
        mean_residual=mean_r,
        tolerance=float(tolerance),
        passed=max_r <= tolerance,
        note=note,
    )


def sweep_residual(kind: str, tau, jet: DirectionJet, points, tolerance: float,
                   a=None, epsilon: complex | None = None) -> ResidualReport:
    """Evaluate one residual family over many points into a ResidualReport.

    kind is one of "kp" (four-term bilinear form), "one-point", "dressed"
    (exponential-dressed one-point form), "longeq", "hierarchy".
    """
    rm = as_riemann_matrix(tau)
    if kind == "kp":
        fn = lambda p: hirota_residual(p, rm, jet)
    elif kind == "one-point":
        if a is None:
            raise InvalidInputError("one-point sweep needs the shift a")
        fn = lambda p: p_residual(p, rm, jet, a)
    elif kind == "dressed":
        if a is None:
            raise InvalidInputError("dressed sweep needs the shift a")
        fn = lambda p: p_AB_residual(p, rm, jet, a)
    elif kind == "longeq":
        fn = lambda p: longeq_residual(p, rm, jet)
    elif kind == "hierarchy":
        if epsilon is None:
            raise InvalidInputError("hierarchy sweep needs epsilon")
        fn = lambda p: hierarchy_residual(p, rm, jet, epsilon)
    else:
        raise InvalidInputError(f"unknown residual kind {kind!r}")
    pts = [as_point(p) for p in points]
    return build_report(pts, [fn(p) for p in pts], tolerance)


def hierarchy_scan(tau, jet: DirectionJet, epsilons, points):
    """Max residual per epsilon plus the fitted log-log decay exponent.

    Returns (per_eps, exponent): per_eps is a list of (epsilon, max residual)
    pairs; exponent is the least-squares slope of log(residual) against
    log(epsilon) (0.0 when fewer than two usable epsilon values).
    """
    rm = as_riemann_matrix(tau)
    pts = [as_point(p) for p in points]
    per_eps = []
    for eps in epsilons:
        worst = max(hierarchy_residual(p, rm, jet, eps) for p in pts)
        per_eps.append((complex(eps), worst))
    usable = [(abs(e), r) for e, r in per_eps if r > 0.0 and abs(e) > 0.0]
    if len(usable) < 2:
        return per_eps, 0.0
    logs_e = np.log([e for e, _ in usable])
    logs_r = np.log([r for _, r in usable])
    slope = float(np.polyfit(logs_e, logs_r, 1)[0])
    return per_eps, slope
