"""Construction of the unique first-order ladder system for a mass profile.

Requiring [H, L+-] = +-delta_e L+- with first-order L+- fixes, for a given
m(x), the operator coefficients, the potential, and a single extremal state
annihilated by the lowering operator:

    alpha_1 = a m^(-1/2)
    beta_1  = (a/2) (m^(-1/2))' + (a delta_e / hbar^2) int m^(1/2) dx
    V       = (delta_e/hbar)^2 [int m^(1/2) dx]^2 / 2
              - (hbar^2/8) ((m^(-1/2))')^2 - hbar^2 (m^(-1/2))'' / (4 m^(1/2))
    psi_0  ~  m^(1/4) exp(-(delta_e/2 hbar^2) [int m^(1/2) dx]^2)

The antiderivative's free constant is fixed by the module-wide anchor
convention (0 when the grid contains it, else x_min); changing the anchor
recenters V and is a pure gauge choice.

The whole formal tower is available in closed form: with y(x) the anchored
antiderivative of m^(1/2) and xi = sqrt(delta_e) y / hbar, the n-th formal
state is m^(1/4) H_n(xi) exp(-xi^2/2) with physicists' Hermite polynomials.
:func:`closed_form_state` evaluates it (and its x-derivative) analytically,
which provides an oracle for the iterated-raising route and analytic seed
derivatives for the SUSY machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite

from . import bdd_solver
from .errors import InstabilityError, InvalidArgumentError
from .mass_profiles import MassProfile
from .numerics import (
    Grid,
    SampledFunction,
    build_grid,
    default_anchor,
    derivative,
    integrate_cumulative,
    l2_normalize,
    require_same_grid,
)

_OVERFLOW_GUARD = 1e150


@dataclass(frozen=True, eq=False)
class LadderSystem:
    """A mass profile together with its ladder-operator realization."""

    profile: MassProfile
    delta_e: float
    a: float
    hbar: float
    grid: Grid
    alpha1: SampledFunction
    beta1: SampledFunction
    potential: SampledFunction
    psi0: SampledFunction
    psi0_derivative: SampledFunction
    e0: float
    antiderivative_sqrt_m: SampledFunction
    anchor: float

    def mass_values(self) -> np.ndarray:
        return self.profile.m(self.grid.points)


@dataclass(frozen=True)
class FormalState:
    """A normalized member of the formal ladder tower."""

    index: int
    energy: float
    wavefunction: SampledFunction
    satisfies_bc: bool


def build_ladder_system(
    profile: MassProfile,
    grid: Grid,
    delta_e: float,
    a: float | None = None,
    hbar: float = 1.0,
    anchor: float | None = None,
) -> LadderSystem:
    """Build the ladder system of ``profile`` on ``grid``.

    ``a`` is the free scale of the lowering operator; it defaults to hbar,
    which makes the ladder commutator equal to delta_e.
    """
    if delta_e <= 0:
        raise InvalidArgumentError(f"delta_e must be positive, got {delta_e}")
    if a is None:
        a = hbar
    if a == 0:
        raise InvalidArgumentError("ladder scale a must be nonzero")
    if hbar <= 0:
        raise InvalidArgumentError(f"hbar must be positive, got {hbar}")
    x = grid.points
    m = profile.m(x)
    if np.any(m <= 0):
        raise InvalidArgumentError(
            f"mass is not positive everywhere on the grid for {profile.label}"
        )
    s = m**-0.5
    s1 = profile.inv_sqrt_m_d1(x)
    s2 = profile.inv_sqrt_m_d2(x)
    if anchor is None:
        anchor = default_anchor(grid)
    f_int = integrate_cumulative(SampledFunction(grid, np.sqrt(m)), anchor)
    F = f_int.values
    alpha1 = SampledFunction(grid, a * s)
    beta1 = SampledFunction(grid, 0.5 * a * s1 + (a * delta_e / hbar**2) * F)
    v = (
        0.5 * (delta_e / hbar) ** 2 * F**2
        - (hbar**2 / 8.0) * s1**2
        - hbar**2 * s2 / (4.0 * np.sqrt(m))
    )
    potential = SampledFunction(grid, v)
    psi0_raw = m**0.25 * np.exp(-(delta_e / (2 * hbar**2)) * F**2)
    psi0 = l2_normalize(SampledFunction(grid, psi0_raw))
    dpsi0 = (profile.m1(x) / (4 * m) - (delta_e / hbar**2) * F * np.sqrt(m)) * psi0.values
    return LadderSystem(
        profile=profile,
        delta_e=float(delta_e),
        a=float(a),
        hbar=float(hbar),
        grid=grid,
        alpha1=alpha1,
        beta1=beta1,
        potential=potential,
        psi0=psi0,
        psi0_derivative=SampledFunction(grid, dpsi0),
        e0=float(delta_e) / 2.0,
        antiderivative_sqrt_m=f_int,
        anchor=float(anchor),
    )


def _derivative_or(psi: SampledFunction, psi_derivative: SampledFunction | None):
    if psi_derivative is None:
        return derivative(psi)
    require_same_grid(psi, psi_derivative)
    return psi_derivative


def apply_lowering(
    sys: LadderSystem,
    psi: SampledFunction,
    psi_derivative: SampledFunction | None = None,
) -> SampledFunction:
    """L- psi = (alpha_1 psi' + beta_1 psi) / sqrt(2)."""
    require_same_grid(sys.alpha1, psi)
    dpsi = _derivative_or(psi, psi_derivative)
    vals = (sys.alpha1.values * dpsi.values + sys.beta1.values * psi.values) / np.sqrt(2)
    mask = dpsi.mask
    if mask is not None:
        vals = np.where(mask, np.nan, vals)
    return SampledFunction(sys.grid, vals, mask)


def apply_raising(
    sys: LadderSystem,
    psi: SampledFunction,
    psi_derivative: SampledFunction | None = None,
) -> SampledFunction:
    """L+ psi = (-alpha_1 psi' + (beta_1 - alpha_1') psi) / sqrt(2)."""
    require_same_grid(sys.alpha1, psi)
    dpsi = _derivative_or(psi, psi_derivative)
    dalpha1 = sys.a * sys.profile.inv_sqrt_m_d1(sys.grid.points)
    vals = (
        -sys.alpha1.values * dpsi.values
        + (sys.beta1.values - dalpha1) * psi.values
    ) / np.sqrt(2)
    mask = dpsi.mask
    if mask is not None:
        vals = np.where(mask, np.nan, vals)
    return SampledFunction(sys.grid, vals, mask)


def state_energy(sys: LadderSystem, n: int) -> float:
    return (n + 0.5) * sys.delta_e


def _raise_with_derivative(sys: LadderSystem, psi, dpsi, energy: float):
    """One raising application, propagating the derivative analytically.

    psi'' is eliminated through the eigenvalue equation, so the iterated
    tower never differentiates sampled data; this keeps the states clean
    even next to a branch point of the profile (the linear profile's origin).
    """
    x = sys.grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    s1 = sys.profile.inv_sqrt_m_d1(x)
    s2 = sys.profile.inv_sqrt_m_d2(x)
    a, hbar, de = sys.a, sys.hbar, sys.delta_e
    alpha1 = sys.alpha1.values
    dalpha1 = a * s1
    d2alpha1 = a * s2
    beta1 = sys.beta1.values
    dbeta1 = 0.5 * a * s2 + (a * de / hbar**2) * np.sqrt(m)
    d2psi = (m1 / m) * dpsi + (2 * m / hbar**2) * (sys.potential.values - energy) * psi
    raised = (-alpha1 * dpsi + (beta1 - dalpha1) * psi) / np.sqrt(2)
    draised = (
        -dalpha1 * dpsi
        - alpha1 * d2psi
        + (dbeta1 - d2alpha1) * psi
        + (beta1 - dalpha1) * dpsi
    ) / np.sqrt(2)
    return raised, draised


def nth_state(
    sys: LadderSystem,
    n: int,
    bc: "bdd_solver.BoundaryCondition | None" = None,
    bc_tolerance: float = 1e-4,
) -> FormalState:
    """n-th formal state by iterated raising, renormalized each step.

    Renormalizing after every application keeps (L+)^n psi_0 representable on
    wide grids; only the shape matters since the energy is known exactly.
    """
    if n < 0:
        raise InvalidArgumentError(f"state index must be non-negative, got {n}")
    psi = sys.psi0.values
    dpsi = sys.psi0_derivative.values
    for step in range(1, n + 1):
        energy = state_energy(sys, step - 1)
        psi, dpsi = _raise_with_derivative(sys, psi, dpsi, energy)
        peak = np.max(np.abs(psi))
        if not np.isfinite(peak) or peak > _OVERFLOW_GUARD:
            raise InstabilityError(
                f"raising application {step} of {n} exceeded the overflow guard"
            )
        if peak == 0.0:
            raise InstabilityError(
                f"raising application {step} of {n} produced the zero function"
            )
        nrm = np.sqrt(np.trapezoid(psi**2, sys.grid.points))
        lead = np.argmax(np.abs(psi) > 1e-8 * peak)
        scale = 1.0 / nrm if psi[lead] > 0 else -1.0 / nrm
        psi = psi * scale
        dpsi = dpsi * scale
    wavefunction = SampledFunction(sys.grid, psi)
    if bc is None:
        bc = bdd_solver.BoundaryCondition.dirichlet()
    ok, _ = bdd_solver.check_boundary_condition(
        wavefunction, sys.profile, bc, bc_tolerance
    )
    return FormalState(
        index=n, energy=state_energy(sys, n), wavefunction=wavefunction,
        satisfies_bc=ok,
    )


def closed_form_state(sys: LadderSystem, n: int) -> tuple[SampledFunction, SampledFunction]:
    """Analytic n-th formal state and its derivative, unnormalized.

    Returns m^(1/4) H_n(xi) exp(-xi^2/2) with xi = sqrt(delta_e) y / hbar and
    physicists' Hermite H_n.  The overall constant is fixed to 1 (the same
    convention the closed-form expressions for the built-in profiles use), so
    iterated raising reproduces these states only up to normalization.
    """
    if n < 0:
        raise InvalidArgumentError(f"state index must be non-negative, got {n}")
    x = sys.grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    xi = np.sqrt(sys.delta_e) / sys.hbar * sys.antiderivative_sqrt_m.values
    dxi = np.sqrt(sys.delta_e * m) / sys.hbar
    hn = eval_hermite(n, xi)
    envelope = m**0.25 * np.exp(-0.5 * xi**2)
    psi = envelope * hn
    dhn = 2.0 * n * eval_hermite(n - 1, xi) if n > 0 else np.zeros_like(xi)
    dpsi = (m1 / (4 * m)) * psi + envelope * (dhn - xi * hn) * dxi
    return SampledFunction(sys.grid, psi), SampledFunction(sys.grid, dpsi)


def bdd_apply_potential(
    profile: MassProfile,
    potential: SampledFunction,
    psi: SampledFunction,
    hbar: float = 1.0,
) -> SampledFunction:
    """Apply H = -(hbar^2/2m) d2/dx2 + (hbar^2 m'/2m^2) d/dx + V pointwise.

    Endpoint values use one-sided differences and are flagged in the result
    mask; interior accuracy is O(h^2).
    """
    grid = require_same_grid(potential, psi)
    x = grid.points
    m = profile.m(x)
    m1 = profile.m1(x)
    dpsi = derivative(psi, 1)
    d2psi = derivative(psi, 2)
    vals = (
        -(hbar**2) / (2 * m) * d2psi.values
        + hbar**2 * m1 / (2 * m**2) * dpsi.values
        + potential.values * psi.values
    )
    mask = d2psi.mask_array() | potential.mask_array()
    mask[0] = mask[-1] = True
    vals = np.where(mask, np.nan, vals)
    return SampledFunction(grid, vals, mask)


def bdd_apply(sys: LadderSystem, psi: SampledFunction) -> SampledFunction:
    """Apply the system's own Hamiltonian to psi."""
    return bdd_apply_potential(sys.profile, sys.potential, psi, sys.hbar)


def hamiltonian_operator(profile: MassProfile, potential: SampledFunction, hbar: float = 1.0):
    """Closure applying the BDD Hamiltonian with the given potential."""

    def apply_h(psi: SampledFunction) -> SampledFunction:
        return bdd_apply_potential(profile, potential, psi, hbar)

    return apply_h


def commutator_residual(
    sys: LadderSystem,
    test_functions: list[SampledFunction],
    interior_margin: int = 8,
) -> float:
    """Max relative defect of [L-, L+] f = (a^2 delta_e / hbar^2) f.

    Measured on interior nodes only; the tests must be smooth and vanish
    near the grid boundary for the defect to reflect discretization error
    rather than one-sided-stencil noise.
    """
    if not test_functions:
        raise InvalidArgumentError("need at least one test function")
    expected = sys.a**2 * sys.delta_e / sys.hbar**2
    sl = slice(interior_margin, sys.grid.n_points - interior_margin)
    worst = 0.0
    for f in test_functions:
        require_same_grid(sys.alpha1, f)
        lm_lp = apply_lowering(sys, apply_raising(sys, f))
        lp_lm = apply_raising(sys, apply_lowering(sys, f))
        defect = lm_lp.values - lp_lm.values - expected * f.values
        denom = np.max(np.abs(f.values[sl]))
        worst = max(worst, float(np.max(np.abs(defect[sl])) / denom))
    return worst


def gaussian_test_functions(
    grid: Grid,
    count: int = 3,
    width_fraction: float = 0.08,
    window: tuple[float, float] | None = None,
) -> list[SampledFunction]:
    """Smooth bump functions supported well inside the grid.

    ``window`` restricts the support; use it to keep tests away from the
    singular points of a transformed system.
    """
    lo, hi = window if window is not None else (grid.x_min, grid.x_max)
    span = hi - lo
    sigma = width_fraction * span
    centers = np.linspace(lo + 0.3 * span, hi - 0.3 * span, count)
    out = []
    for c in centers:
        vals = np.exp(-((grid.points - c) ** 2) / (2 * sigma**2))
        out.append(SampledFunction(grid, vals))
    return out


def auto_grid(
    profile: MassProfile,
    delta_e: float,
    n_points: int = 4001,
    n_max: int = 5,
    hbar: float = 1.0,
    tail: float = 1e-10,
    start_half_width: float = 4.0,
    edge_offset: float = 1e-3,
    max_rounds: int = 40,
) -> Grid:
    """Choose grid bounds so the n_max-th formal state has negligible tails.

    Infinite domain sides are widened geometrically until |psi_n_max| at the
    corresponding end drops below ``tail`` times its peak, which makes the
    Dirichlet truncation error negligible against the O(h^2) discretization
    error.  A finite domain edge (the linear profile's origin) is pinned at
    ``edge_offset`` inside the domain instead.
    """
    lo_dom, hi_dom = profile.domain
    left_fixed = np.isfinite(lo_dom)
    right_fixed = np.isfinite(hi_dom)
    lo = lo_dom + edge_offset if left_fixed else -start_half_width
    hi = hi_dom - edge_offset if right_fixed else start_half_width
    if left_fixed and not right_fixed:
        hi = max(hi, lo + 2 * start_half_width)
    for _ in range(max_rounds):
        grid = build_grid(lo, hi, n_points)
        sysx = build_ladder_system(profile, grid, delta_e, hbar=hbar)
        psi, _ = closed_form_state(sysx, n_max)
        peak = np.max(np.abs(psi.values))
        grow_left = (not left_fixed) and abs(psi.values[0]) > tail * peak
        grow_right = (not right_fixed) and abs(psi.values[-1]) > tail * peak
        if not grow_left and not grow_right:
            return grid
        if grow_left:
            lo = lo * 1.3 if lo < 0 else lo - 0.3 * (hi - lo)
        if grow_right:
            hi = hi * 1.3 if hi > 0 else hi + 0.3 * (hi - lo)
    raise InstabilityError(
        f"auto_grid failed to confine state {n_max} within {max_rounds} rounds"
    )
