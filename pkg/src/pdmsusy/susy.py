"""First- and second-order SUSY transformations of BDD Hamiltonians.

A seed solution u_1 with (H_0 - eps_1) u_1 = 0 factorizes the Hamiltonian
through the first-order pair

    A_1      = (hbar/sqrt(2m)) d/dx + W_1,        W_1 = -(hbar/sqrt(2m)) u_1'/u_1,
    A_1^dag  = -(hbar/sqrt(2m)) d/dx + W_1 + (hbar/(2 sqrt(2))) m'/m^(3/2),

with H_0 - eps_1 = A_1^dag A_1 and the partner H_1 - eps_1 = A_1 A_1^dag.
Second-order partners chain a second factorization, either with a distinct
energy (non-confluent, built from the Wronskian of two seeds) or with the
same energy (confluent, built from w = (1 - d) + d int u_1^2 dx).

Numerical strategy: wherever a seed's derivative is available analytically,
second derivatives are eliminated through the eigenvalue equation
u'' = (m'/m) u' + (2m/hbar^2)(V_0 - eps) u, so partner potentials are
evaluated without stacked finite differences.  Zeros of a transformation's
denominator (u_1, W(u_1, u_2), or w) are detected, masked within a few cells,
and reported; each regular subdomain is treated as its own problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bdd_solver import rayleigh_quotient  # noqa: F401  (re-exported convenience)
from .errors import (
    DegenerateWronskianError,
    InstabilityError,
    InvalidArgumentError,
    InvalidSeedError,
    NoRegularSubdomainError,
    WrongAlgorithmError,
    WrongModeError,
)
from .ladder import LadderSystem, bdd_apply, bdd_apply_potential
from .mass_profiles import MassProfile
from .numerics import (
    Grid,
    SampledFunction,
    default_anchor,
    derivative,
    integrate_cumulative,
    require_same_grid,
)

#: cells excluded on each side of a detected denominator zero
MASK_RADIUS = 3
#: minimal unmasked run length for a subdomain to be usable
MIN_SUBDOMAIN_CELLS = 8


@dataclass(frozen=True, eq=False)
class SingularityReport:
    """Zeros of a transformation denominator and the regular intervals."""

    locations: np.ndarray
    subdomains: list[tuple[float, float]]

    @property
    def is_regular(self) -> bool:
        return len(self.locations) == 0


@dataclass(frozen=True, eq=False)
class FirstOrderTransform:
    """A first-order SUSY transformation record."""

    system: LadderSystem
    profile: MassProfile
    grid: Grid
    hbar: float
    seed: SampledFunction
    seed_derivative: SampledFunction
    epsilon1: float
    superpotential: SampledFunction
    partner_potential: SampledFunction
    base_potential: SampledFunction
    singularities: SingularityReport
    seed_residual: float
    riccati_deviation: float


@dataclass(frozen=True, eq=False)
class SecondOrderTransform:
    """A second-order (chained or confluent) SUSY transformation record."""

    first: FirstOrderTransform
    mode: str  # "nonconfluent" | "confluent"
    seed2: SampledFunction | None
    seed2_derivative: SampledFunction | None
    epsilon2: float
    d_parameter: float | None
    w_function: SampledFunction | None
    h1_seed: SampledFunction
    superpotential2: SampledFunction
    partner_potential2: SampledFunction
    singularities: SingularityReport

    @property
    def system(self) -> LadderSystem:
        return self.first.system

    @property
    def grid(self) -> Grid:
        return self.first.grid


def detect_zeros(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Zeros of ``values`` on the open domain, located by linear interpolation.

    A value that vanishes exactly at a boundary node is not counted: the
    endpoints do not belong to the open interval the singular analysis
    partitions.
    """
    x = grid.points
    zeros = []
    exact = np.nonzero(values == 0.0)[0]
    zeros.extend(x[i] for i in exact if 0 < i < grid.n_points - 1)
    v0 = values[:-1]
    v1 = values[1:]
    crossing = np.nonzero((v0 * v1 < 0.0))[0]
    for i in crossing:
        t = v0[i] / (v0[i] - v1[i])
        zeros.append(x[i] + t * grid.spacing)
    return np.array(sorted(zeros))


def singularity_mask(grid: Grid, locations: np.ndarray, radius: int = MASK_RADIUS) -> np.ndarray | None:
    if len(locations) == 0:
        return None
    mask = np.zeros(grid.n_points, dtype=bool)
    for z in locations:
        i = grid.index_of(z)
        lo = max(0, i - radius)
        hi = min(grid.n_points, i + radius + 1)
        mask[lo:hi] = True
    return mask


def singularity_report(grid: Grid, denominator: np.ndarray) -> tuple[SingularityReport, np.ndarray | None]:
    """Report + mask for the zero set of a denominator array."""
    locations = detect_zeros(grid, denominator)
    edges = [grid.x_min, *locations, grid.x_max]
    subdomains = [
        (float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a
    ]
    report = SingularityReport(locations=locations, subdomains=subdomains)
    return report, singularity_mask(grid, locations)


def _normalize_subdomains(grid: Grid, values: np.ndarray, mask: np.ndarray | None) -> SampledFunction:
    """Unit-normalize each maximal unmasked run; too-short runs get masked."""
    if mask is None:
        mask = np.zeros(grid.n_points, dtype=bool)
    else:
        mask = mask.copy()
    values = values.copy()
    out_mask = mask.copy()
    n = grid.n_points
    usable = 0
    i = 0
    while i < n:
        if mask[i]:
            i += 1
            continue
        j = i
        while j < n and not mask[j]:
            j += 1
        block = values[i:j]
        if j - i >= MIN_SUBDOMAIN_CELLS and np.any(block != 0.0):
            nrm = np.sqrt(np.trapezoid(block**2, grid.points[i:j]))
            block = block / nrm
            lead = np.argmax(np.abs(block) > 1e-8 * np.max(np.abs(block)))
            if block[lead] < 0:
                block = -block
            values[i:j] = block
            usable += 1
        else:
            out_mask[i:j] = True
            values[i:j] = np.nan
        i = j
    if usable == 0:
        raise NoRegularSubdomainError(
            "no regular subdomain large enough to normalize on"
        )
    if not out_mask.any():
        out_mask = None
    else:
        values = np.where(out_mask, np.nan, values)
    return SampledFunction(grid, values, out_mask)


def eigen_residual(
    apply_h,
    psi: SampledFunction,
    energy: float,
    interior_margin: int = 5,
    x_window: tuple[float, float] | None = None,
    pointwise: bool = False,
) -> float:
    """Relative residual of (H - energy) psi over the unmasked interior.

    With ``pointwise`` the result is max |r| / |psi| over the window, which
    is the right metric for states spanning many orders of magnitude.
    """
    h_psi = apply_h(psi)
    keep = ~(h_psi.mask_array() | psi.mask_array())
    keep[:interior_margin] = False
    keep[len(keep) - interior_margin :] = False
    if x_window is not None:
        x = psi.grid.points
        keep &= (x >= x_window[0]) & (x <= x_window[1])
    if not keep.any():
        raise InvalidArgumentError("empty residual window")
    r = h_psi.values[keep] - energy * psi.values[keep]
    p = psi.values[keep]
    if pointwise:
        scale = np.abs(p)
        ok = scale > 0
        return float(np.max(np.abs(r[ok]) / scale[ok]))
    denom = float(np.linalg.norm(p))
    if denom == 0.0:
        raise InvalidArgumentError("state vanishes on the residual window")
    return float(np.linalg.norm(r) / denom)


def domain_window(sys: LadderSystem, fraction: float = 0.05) -> tuple[float, float]:
    """Grid window inset from sides where the profile's domain is finite.

    Near a finite domain edge (the linear profile's origin) the solutions
    carry branch-point behaviour that finite differences cannot resolve;
    residual checks stay a fixed fraction of the span away from it.
    Infinite sides need no inset: states decay there.
    """
    lo, hi = sys.grid.x_min, sys.grid.x_max
    span = hi - lo
    dom_lo, dom_hi = sys.profile.domain
    if np.isfinite(dom_lo):
        lo += fraction * span
    if np.isfinite(dom_hi):
        hi -= fraction * span
    return lo, hi


def validate_seed(
    sys: LadderSystem,
    u1: SampledFunction,
    epsilon1: float,
    tolerance: float = 1e-4,
    interior_margin: int = 5,
) -> float:
    """Check (H_0 - eps_1) u_1 = 0 with the finite-difference Hamiltonian.

    The finite-difference application floor is O(h^2), so the default
    tolerance is 1e-4 at typical grid resolutions; it tightens on refinement.
    """
    residual = eigen_residual(
        lambda f: bdd_apply(sys, f), u1, epsilon1, interior_margin,
        x_window=domain_window(sys),
    )
    if residual > tolerance:
        raise InvalidSeedError(
            f"seed fails (H0 - {epsilon1}) u = 0: relative residual "
            f"{residual:.3e} > {tolerance:.3e}",
            residual=residual,
        )
    return residual


def _seed_pieces(sys: LadderSystem, u1, u1_derivative):
    """Common arrays for a validated seed: derivatives and log-derivative."""
    require_same_grid(sys.potential, u1)
    du1 = u1_derivative if u1_derivative is not None else derivative(u1)
    require_same_grid(u1, du1)
    return du1


def superpotential_from_seed(
    u1: SampledFunction,
    profile: MassProfile,
    hbar: float = 1.0,
    u1_derivative: SampledFunction | None = None,
) -> SampledFunction:
    """W_1 = -(hbar / sqrt(2 m)) u_1'/u_1, masked at the zeros of u_1."""
    if np.max(np.abs(u1.values)) == 0.0:
        raise InvalidSeedError("seed is identically zero")
    du1 = u1_derivative if u1_derivative is not None else derivative(u1)
    grid = require_same_grid(u1, du1)
    m = profile.m(grid.points)
    _, mask = singularity_report(grid, u1.values)
    if du1.mask is not None:
        mask = du1.mask_array() | (mask if mask is not None else False)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = -(hbar / np.sqrt(2.0 * m)) * du1.values / u1.values
    if mask is not None:
        vals = np.where(mask, np.nan, vals)
    return SampledFunction(grid, vals, mask)


def first_order_transform(
    sys: LadderSystem,
    u1: SampledFunction,
    epsilon1: float,
    u1_derivative: SampledFunction | None = None,
    validate_tolerance: float = 1e-4,
    crosscheck_tolerance: float = 2e-2,
    interior_margin: int = 5,
) -> FirstOrderTransform:
    """First-order transform with seed u_1 at factorization energy eps_1.

    The partner potential is computed from the log-derivative formula

        V_1 = V_0 - hbar^2 m^(-1/2) { m^(-1/2) [log(m^(-1/4) u_1)]' }'

    with u_1'' eliminated through the eigenvalue equation, and cross-checked
    against the independent Riccati route
    V_1 = V_0 + 2 hbar W_1'/sqrt(2m) - (hbar^2/2) m^(-1/2) (m^(-1/2))''
    with W_1' taken by finite differences; a disagreement beyond
    ``crosscheck_tolerance`` (relative, away from singularities) aborts.
    """
    du1 = _seed_pieces(sys, u1, u1_derivative)
    seed_residual = validate_seed(sys, u1, epsilon1, validate_tolerance, interior_margin)
    grid = sys.grid
    x = grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    m2 = sys.profile.m2(x)
    s = m**-0.5
    s1 = sys.profile.inv_sqrt_m_d1(x)
    s2 = sys.profile.inv_sqrt_m_d2(x)
    hbar = sys.hbar
    v0 = sys.potential.values

    report, mask = singularity_report(grid, u1.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = du1.values / u1.values
        ddu1 = (m1 / m) * du1.values + (2 * m / hbar**2) * (v0 - epsilon1) * u1.values
        dr1 = ddu1 / u1.values - r1**2
        q = r1 - m1 / (4 * m)
        dq = dr1 - (m2 / (4 * m) - m1**2 / (4 * m**2))
        v1 = v0 - hbar**2 * s * (s1 * q + s * dq)
    if mask is not None:
        v1 = np.where(mask, np.nan, v1)
    partner = SampledFunction(grid, v1, mask)

    w1 = superpotential_from_seed(u1, sys.profile, hbar, du1)

    # independent Riccati-route evaluation with finite-difference W_1'
    dw1 = derivative(w1)
    v1_riccati = v0 + 2 * hbar * dw1.values / np.sqrt(2 * m) - 0.5 * hbar**2 * s * s2
    exclusion = singularity_mask(grid, report.locations, radius=25 * MASK_RADIUS)
    keep = ~(partner.mask_array() | dw1.mask_array())
    if exclusion is not None:
        keep &= ~exclusion
    keep[:interior_margin] = False
    keep[len(keep) - interior_margin :] = False
    deviation = float(
        np.max(np.abs(v1[keep] - v1_riccati[keep]) / (1.0 + np.abs(v1[keep])))
    )
    if deviation > crosscheck_tolerance:
        raise InstabilityError(
            f"partner-potential routes disagree: relative deviation "
            f"{deviation:.3e} > {crosscheck_tolerance:.3e}"
        )
    return FirstOrderTransform(
        system=sys,
        profile=sys.profile,
        grid=grid,
        hbar=hbar,
        seed=u1,
        seed_derivative=du1,
        epsilon1=float(epsilon1),
        superpotential=w1,
        partner_potential=partner,
        base_potential=sys.potential,
        singularities=report,
        seed_residual=seed_residual,
        riccati_deviation=deviation,
    )


def map_state_first(
    t: FirstOrderTransform,
    psi: SampledFunction,
    psi_derivative: SampledFunction | None = None,
) -> SampledFunction:
    """Map an H_0 state into H_1: phi ~ m^(-1/2) u_1^(-1) W(u_1, psi).

    Returns the zero function when psi is proportional to the seed (the map
    annihilates it); otherwise the result is normalized per regular
    subdomain.
    """
    require_same_grid(t.seed, psi)
    dpsi = psi_derivative if psi_derivative is not None else derivative(psi)
    grid = t.grid
    m = t.profile.m(grid.points)
    u1, du1 = t.seed.values, t.seed_derivative.values
    wr = u1 * dpsi.values - du1 * psi.values
    scale = np.nanmax(np.abs(u1 * dpsi.values) + np.abs(du1 * psi.values))
    if scale == 0.0 or np.nanmax(np.abs(wr)) < 1e-9 * scale:
        return SampledFunction(grid, np.zeros(grid.n_points))
    mask = singularity_mask(grid, t.singularities.locations)
    for extra in (psi.mask, dpsi.mask):
        if extra is not None:
            mask = extra | (mask if mask is not None else False)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = wr / (np.sqrt(m) * u1)
    return _normalize_subdomains(grid, vals, mask)


def missing_state_first(t: FirstOrderTransform) -> SampledFunction:
    """The partner state at eps_1 unreachable by the map: sqrt(m)/u_1."""
    grid = t.grid
    m = t.profile.m(grid.points)
    mask = singularity_mask(grid, t.singularities.locations)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.sqrt(m) / t.seed.values
    return _normalize_subdomains(grid, vals, mask)


def _wronskian_pair(sys, u1, du1, u2, du2, epsilon1, epsilon2):
    """W(u1, u2) and its derivative via the Sturm-Liouville identity.

    d/dx [W] = (m'/m) W + (2m/hbar^2)(eps1 - eps2) u1 u2 holds exactly for
    eigenfunction pairs, avoiding a second layer of differencing.
    """
    x = sys.grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    wr = u1 * du2 - du1 * u2
    dwr = (m1 / m) * wr + (2 * m / sys.hbar**2) * (epsilon1 - epsilon2) * u1 * u2
    return wr, dwr


def second_order_nonconfluent(
    sys: LadderSystem,
    u1: SampledFunction,
    epsilon1: float,
    u2: SampledFunction,
    epsilon2: float,
    u1_derivative: SampledFunction | None = None,
    u2_derivative: SampledFunction | None = None,
    validate_tolerance: float = 1e-4,
) -> SecondOrderTransform:
    """Chained second-order transform with distinct factorization energies.

    V_2 = V_0 - hbar^2 m^(-1/2) { m^(-1/2) [log(m^(-1) W(u_1,u_2))]' }',
    with the H_1 seed v_2 ~ m^(-1/2) u_1^(-1) W(u_1, u_2).  Singularities of
    V_2 are the zeros of the Wronskian; the intermediate V_1 singularities
    (zeros of u_1) cancel out of the combined formula.
    """
    if epsilon2 == epsilon1:
        raise WrongAlgorithmError(
            "equal factorization energies require confluent_transform"
        )
    first = first_order_transform(
        sys, u1, epsilon1, u1_derivative, validate_tolerance
    )
    du2 = _seed_pieces(sys, u2, u2_derivative)
    validate_seed(sys, u2, epsilon2, validate_tolerance)
    grid = sys.grid
    x = grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    s = m**-0.5
    s1 = sys.profile.inv_sqrt_m_d1(x)
    hbar = sys.hbar
    du1 = first.seed_derivative
    wr, dwr = _wronskian_pair(
        sys, u1.values, du1.values, u2.values, du2.values, epsilon1, epsilon2
    )
    scale = np.max(np.abs(u1.values * du2.values) + np.abs(du1.values * u2.values))
    if scale == 0.0 or np.max(np.abs(wr)) < 1e-10 * scale:
        raise DegenerateWronskianError(
            "seeds are proportional: their Wronskian vanishes identically"
        )
    report, mask = singularity_report(grid, wr)
    de = epsilon1 - epsilon2
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (2 * m / hbar**2) * de * u1.values * u2.values / wr
        dg = (2 * de / hbar**2) * (
            m1 * u1.values * u2.values
            + m * (du1.values * u2.values + u1.values * du2.values)
        ) / wr - g * dwr / wr
        v2 = sys.potential.values - hbar**2 * s * (s1 * g + s * dg)
        # H_1 seed and its log-derivative (for W_2); singular also at u_1 zeros
        v2_seed = s * wr / u1.values
        seed_logd = -m1 / (2 * m) + dwr / wr - du1.values / u1.values
    seed_mask = singularity_mask(grid, first.singularities.locations)
    if mask is not None:
        seed_mask = mask | (seed_mask if seed_mask is not None else False)
    if mask is not None:
        v2 = np.where(mask, np.nan, v2)
    if seed_mask is not None:
        v2_seed = np.where(seed_mask, np.nan, v2_seed)
        seed_logd = np.where(seed_mask, np.nan, seed_logd)
    w2 = -(hbar / np.sqrt(2 * m)) * seed_logd
    return SecondOrderTransform(
        first=first,
        mode="nonconfluent",
        seed2=u2,
        seed2_derivative=du2,
        epsilon2=float(epsilon2),
        d_parameter=None,
        w_function=None,
        h1_seed=SampledFunction(grid, v2_seed, seed_mask),
        superpotential2=SampledFunction(grid, w2, seed_mask),
        partner_potential2=SampledFunction(grid, v2, mask),
        singularities=report,
    )


def confluent_transform(
    sys: LadderSystem,
    u1: SampledFunction,
    epsilon1: float,
    d: float,
    anchor: float | None = None,
    u1_derivative: SampledFunction | None = None,
    validate_tolerance: float = 1e-4,
) -> SecondOrderTransform:
    """Confluent second-order transform (equal factorization energies).

    Abel's identity gives the general H_1 solution at eps_1 through
    w(x) = (1 - d) + d int u_1^2 dx, d in [0, 1], and

        V_2 = V_0 - hbar^2 m^(-1/2) { m^(-1/2) [log w]' }'.

    The antiderivative follows the module-wide anchor convention (0 when the
    grid contains it).  Note the transformation family — in particular which
    d values are singular — depends on both the anchor and the seed's
    normalization, since both rescale int u_1^2 dx.
    """
    if not 0.0 <= d <= 1.0:
        raise InvalidArgumentError(f"confluent parameter d must be in [0, 1], got {d}")
    first = first_order_transform(
        sys, u1, epsilon1, u1_derivative, validate_tolerance
    )
    grid = sys.grid
    x = grid.points
    m = sys.profile.m(x)
    m1 = sys.profile.m1(x)
    s = m**-0.5
    s1 = sys.profile.inv_sqrt_m_d1(x)
    hbar = sys.hbar
    if anchor is None:
        anchor = default_anchor(grid)
    integral = integrate_cumulative(
        SampledFunction(grid, u1.values**2), anchor
    )
    w = (1.0 - d) + d * integral.values
    report, mask = singularity_report(grid, w)
    du1 = first.seed_derivative.values
    with np.errstate(divide="ignore", invalid="ignore"):
        g = d * u1.values**2 / w
        dg = d * (2 * u1.values * du1 * w - d * u1.values**4) / w**2
        v2 = sys.potential.values - hbar**2 * s * (s1 * g + s * dg)
        v2_seed = np.sqrt(m) * w / u1.values
        seed_logd = m1 / (2 * m) + g - du1 / u1.values
    seed_mask = singularity_mask(grid, first.singularities.locations)
    if mask is not None:
        seed_mask = mask | (seed_mask if seed_mask is not None else False)
    if mask is not None:
        v2 = np.where(mask, np.nan, v2)
    if seed_mask is not None:
        v2_seed = np.where(seed_mask, np.nan, v2_seed)
        seed_logd = np.where(seed_mask, np.nan, seed_logd)
    w2 = -(hbar / np.sqrt(2 * m)) * seed_logd
    return SecondOrderTransform(
        first=first,
        mode="confluent",
        seed2=None,
        seed2_derivative=None,
        epsilon2=float(epsilon1),
        d_parameter=float(d),
        w_function=SampledFunction(grid, w),
        h1_seed=SampledFunction(grid, v2_seed, seed_mask),
        superpotential2=SampledFunction(grid, w2, seed_mask),
        partner_potential2=SampledFunction(grid, v2, mask),
        singularities=report,
    )


def map_state_second(
    t: SecondOrderTransform,
    phi: SampledFunction,
    phi_derivative: SampledFunction | None = None,
) -> SampledFunction:
    """Map an H_1 state into H_2: chi ~ m^(-1/2) v_2^(-1) W(v_2, phi)."""
    require_same_grid(t.h1_seed, phi)
    dphi = phi_derivative if phi_derivative is not None else derivative(phi)
    grid = t.first.grid
    m = t.first.profile.m(grid.points)
    v2 = t.h1_seed.values
    # v_2' recovered from the stored superpotential: W_2 = -(hbar/sqrt(2m)) v_2'/v_2
    dv2 = -np.sqrt(2 * m) / t.first.hbar * t.superpotential2.values * v2
    wr = v2 * dphi.values - dv2 * phi.values
    scale = np.nanmax(np.abs(v2 * dphi.values) + np.abs(dv2 * phi.values))
    if scale == 0.0 or np.nanmax(np.abs(wr)) < 1e-9 * scale:
        return SampledFunction(grid, np.zeros(grid.n_points))
    mask = t.h1_seed.mask_array().copy()
    zero_mask = singularity_mask(grid, detect_zeros(grid, np.where(np.isnan(v2), 1.0, v2)))
    if zero_mask is not None:
        mask |= zero_mask
    for extra in (phi.mask, dphi.mask):
        if extra is not None:
            mask |= extra
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = wr / (np.sqrt(m) * v2)
    return _normalize_subdomains(grid, vals, mask if mask.any() else None)


def missing_state_second(t: SecondOrderTransform) -> SampledFunction:
    """Non-confluent missing state chi_eps2 ~ m u_1 / W(u_1, u_2)."""
    if t.mode != "nonconfluent":
        raise WrongModeError(
            "missing_state_second applies to non-confluent transforms; "
            "use confluent_missing_state"
        )
    grid = t.first.grid
    m = t.first.profile.m(grid.points)
    u1 = t.first.seed.values
    du1 = t.first.seed_derivative.values
    du2 = t.seed2_derivative.values
    wr = u1 * du2 - du1 * t.seed2.values
    mask = singularity_mask(grid, t.singularities.locations)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = m * u1 / wr
    return _normalize_subdomains(grid, vals, mask)


def confluent_missing_state(t: SecondOrderTransform) -> SampledFunction:
    """Confluent missing state chi_eps ~ u_1 / w."""
    if t.mode != "confluent":
        raise WrongModeError(
            "confluent_missing_state applies to confluent transforms; "
            "use missing_state_second"
        )
    grid = t.first.grid
    mask = singularity_mask(grid, t.singularities.locations)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = t.first.seed.values / t.w_function.values
    return _normalize_subdomains(grid, vals, mask)


def critical_d(
    sys: LadderSystem,
    u1: SampledFunction,
    epsilon1: float,
    anchor: float | None = None,
    u1_derivative: SampledFunction | None = None,
    validate_tolerance: float = 1e-4,
    refine_tolerance: float = 1e-6,
) -> tuple[float, bool]:
    """Infimum of d in [0, 1] for which w(x; d) vanishes on the open domain.

    Since w is affine in d, w(x; d) = 0 exactly when d = 1/(1 - I(x)) with
    I the anchored antiderivative of u_1^2, so the threshold is the minimum
    of that expression where it lands in [0, 1]; a bisection on the
    sign-change predicate confirms it to ``refine_tolerance``.  Returns
    (1.0, True) when no d in [0, 1] is singular.
    """
    validate_seed(sys, u1, epsilon1, validate_tolerance)
    grid = sys.grid
    if anchor is None:
        anchor = default_anchor(grid)
    integral = integrate_cumulative(SampledFunction(grid, u1.values**2), anchor)
    interior = integral.values[1:-1]

    def singular(d: float) -> bool:
        return bool(np.min((1.0 - d) + d * interior) <= 0.0)

    negative = interior[interior < 0.0]
    if negative.size == 0 or not singular(1.0):
        return 1.0, True
    d_candidate = float(1.0 / (1.0 - np.min(negative)))
    lo = max(0.0, d_candidate - 1e-3)
    hi = min(1.0, d_candidate + 1e-3)
    while singular(lo):
        lo = max(0.0, lo - 1e-2)
        if lo == 0.0:
            break
    while not singular(hi):
        hi = min(1.0, hi + 1e-2)
        if hi == 1.0:
            break
    while hi - lo > refine_tolerance:
        mid = 0.5 * (lo + hi)
        if singular(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), False


def first_order_operators(t: FirstOrderTransform):
    """Closures applying A_1 and A_1^dag (finite-difference derivatives)."""
    grid = t.grid
    m = t.profile.m(grid.points)
    s1 = t.profile.inv_sqrt_m_d1(grid.points)
    coeff = t.hbar / np.sqrt(2 * m)
    w1 = t.superpotential.values
    w1_mask = t.superpotential.mask

    def _combine(psi, dpsi, sign, shift):
        vals = sign * coeff * dpsi.values + (w1 + shift) * psi.values
        mask = dpsi.mask_array() | psi.mask_array()
        if w1_mask is not None:
            mask = mask | w1_mask
        if mask.any():
            vals = np.where(mask, np.nan, vals)
            return SampledFunction(grid, vals, mask)
        return SampledFunction(grid, vals)

    def apply_a(psi: SampledFunction) -> SampledFunction:
        return _combine(psi, derivative(psi), 1.0, 0.0)

    def apply_a_dagger(psi: SampledFunction) -> SampledFunction:
        return _combine(psi, derivative(psi), -1.0, -t.hbar / np.sqrt(2.0) * s1)

    return apply_a, apply_a_dagger


def second_order_operators(t: SecondOrderTransform):
    """Closures applying A_2 and A_2^dag of the second factorization step."""
    grid = t.first.grid
    m = t.first.profile.m(grid.points)
    s1 = t.first.profile.inv_sqrt_m_d1(grid.points)
    coeff = t.first.hbar / np.sqrt(2 * m)
    w2 = t.superpotential2.values
    w2_mask = t.superpotential2.mask

    def _combine(psi, dpsi, sign, shift):
        vals = sign * coeff * dpsi.values + (w2 + shift) * psi.values
        mask = dpsi.mask_array() | psi.mask_array()
        if w2_mask is not None:
            mask = mask | w2_mask
        if mask.any():
            vals = np.where(mask, np.nan, vals)
            return SampledFunction(grid, vals, mask)
        return SampledFunction(grid, vals)

    def apply_a2(psi: SampledFunction) -> SampledFunction:
        return _combine(psi, derivative(psi), 1.0, 0.0)

    def apply_a2_dagger(psi: SampledFunction) -> SampledFunction:
        return _combine(psi, derivative(psi), -1.0, -t.first.hbar / np.sqrt(2.0) * s1)

    return apply_a2, apply_a2_dagger


def partner_hamiltonian(t: FirstOrderTransform | SecondOrderTransform):
    """Closure applying the partner Hamiltonian (H_1 or H_2)."""
    if isinstance(t, SecondOrderTransform):
        profile, potential, hbar = (
            t.first.profile,
            t.partner_potential2,
            t.first.hbar,
        )
    else:
        profile, potential, hbar = t.profile, t.partner_potential, t.hbar

    def apply_h(psi: SampledFunction) -> SampledFunction:
        return bdd_apply_potential(profile, potential, psi, hbar)

    return apply_h


def partner_ladder_apply(
    t: FirstOrderTransform | SecondOrderTransform,
    sys: LadderSystem,
    psi: SampledFunction,
    direction: str,
) -> SampledFunction:
    """Apply the partner's natural ladder operator by composition.

    For a first-order transform these are the third-order operators
    A_1 L+- A_1^dag; for a second-order transform the fifth-order
    (A_2 A_1) L+- (A_1^dag A_2^dag).  Compositions of validated first-order
    factors keep the O(h^2) differencing accuracy; high-order stencils are
    never formed.
    """
    from .ladder import apply_lowering, apply_raising

    if direction not in ("up", "down"):
        raise InvalidArgumentError(f"direction must be 'up' or 'down', got {direction!r}")
    ladder_op = apply_raising if direction == "up" else apply_lowering
    if isinstance(t, SecondOrderTransform):
        a1, a1d = first_order_operators(t.first)
        a2, a2d = second_order_operators(t)
        return a2(a1(ladder_op(sys, a1d(a2d(psi)))))
    a1, a1d = first_order_operators(t)
    return a1(ladder_op(sys, a1d(psi)))


def exclusion_ring(
    t: FirstOrderTransform | SecondOrderTransform, radius_cells: int = 25 * MASK_RADIUS
) -> np.ndarray | None:
    """Wide mask around every singular point touched by a transform's operators.

    Finite differencing loses accuracy in a neighbourhood of a pole that is
    much wider than the hard mask; residual checks exclude this ring.
    """
    if isinstance(t, SecondOrderTransform):
        locations = np.concatenate(
            [t.first.singularities.locations, t.singularities.locations]
        )
        grid = t.first.grid
    else:
        locations = t.singularities.locations
        grid = t.grid
    return singularity_mask(grid, locations, radius=radius_cells)


def intertwining_residual(
    apply_h_a,
    apply_h_b,
    apply_a,
    tests: list[SampledFunction],
    interior_margin: int = 8,
    exclude: np.ndarray | None = None,
) -> float:
    """Max relative defect of H_b A f = A H_a f over the test set."""
    if len(tests) < 3:
        raise InvalidArgumentError(
            f"need at least 3 interior-supported test functions, got {len(tests)}"
        )
    worst = 0.0
    for f in tests:
        af = apply_a(f)
        lhs = apply_h_b(af)
        rhs = apply_a(apply_h_a(f))
        keep = ~(lhs.mask_array() | rhs.mask_array() | af.mask_array())
        if exclude is not None:
            keep &= ~exclude
        keep[:interior_margin] = False
        keep[len(keep) - interior_margin :] = False
        if not keep.any():
            raise InvalidArgumentError("empty interior window for residual")
        denom = np.max(np.abs(af.values[keep]))
        if denom == 0.0:
            continue
        worst = max(
            worst, float(np.max(np.abs(lhs.values[keep] - rhs.values[keep])) / denom)
        )
    return worst


def factorization_residual(
    apply_h,
    apply_a,
    apply_a_dagger,
    epsilon: float,
    tests: list[SampledFunction],
    dagger_first: bool = True,
    interior_margin: int = 8,
    exclude: np.ndarray | None = None,
) -> float:
    """Max relative defect of (A^dag A + eps) f = H f (or A A^dag + eps)."""
    if len(tests) < 3:
        raise InvalidArgumentError(
            f"need at least 3 interior-supported test functions, got {len(tests)}"
        )
    worst = 0.0
    for f in tests:
        if dagger_first:
            lhs = apply_a_dagger(apply_a(f))
        else:
            lhs = apply_a(apply_a_dagger(f))
        rhs = apply_h(f)
        keep = ~(lhs.mask_array() | rhs.mask_array())
        if exclude is not None:
            keep &= ~exclude
        keep[:interior_margin] = False
        keep[len(keep) - interior_margin :] = False
        diff = lhs.values[keep] + epsilon * f.values[keep] - rhs.values[keep]
        denom = np.max(np.abs(rhs.values[keep]))
        worst = max(worst, float(np.max(np.abs(diff)) / denom))
    return worst


def residual_window(
    t: FirstOrderTransform | SecondOrderTransform, inset_fraction: float = 0.08
) -> tuple[float, float]:
    """Largest regular subdomain, inset on both sides.

    Eigen-residuals of singular-transform states are meaningful only away
    from the masked denominator zeros; this picks the natural window.
    """
    report = t.singularities
    lo, hi = max(
        report.subdomains, key=lambda ab: ab[1] - ab[0]
    ) if report.subdomains else (t.grid.x_min, t.grid.x_max)
    inset = inset_fraction * (hi - lo)
    return lo + inset, hi - inset


def edge_mass_fraction(psi: SampledFunction, edge_fraction: float = 0.1) -> float:
    """Fraction of the L2 mass carried by the outer ``edge_fraction`` of nodes."""
    n = psi.grid.n_points
    k = max(1, int(edge_fraction * n))
    vals = np.where(psi.mask_array(), 0.0, psi.values)
    total = np.sum(vals**2)
    if total == 0.0:
        return 0.0
    edges = np.sum(vals[:k] ** 2) + np.sum(vals[-k:] ** 2)
    return float(edges / total)


def looks_normalizable(psi: SampledFunction, edge_fraction: float = 0.1) -> bool:
    """Heuristic truncation-stability check: decaying states keep their mass
    away from the grid edges, while non-normalizable ones pile it up there."""
    return edge_mass_fraction(psi, edge_fraction) < 0.5
