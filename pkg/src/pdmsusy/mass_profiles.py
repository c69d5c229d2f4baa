"""Mass profiles m(x) with analytic derivatives, and operator-ordering tools.

A profile carries m, m', m'' as callables so that quantities involving m''
(the potential, effective-potential corrections) never require two numerical
derivatives of tabulated data.  Profiles are immutable and evaluation is pure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, InvalidArgumentError
from .numerics import SampledFunction, require_same_grid

_ORDERING_TOL = 1e-12


@dataclass(frozen=True)
class MassProfile:
    """Position-dependent mass with its first two derivatives.

    ``domain`` is the open interval on which m > 0; evaluation outside it
    raises :class:`DomainError`.
    """

    eval_m: Callable[[np.ndarray], np.ndarray]
    eval_m1: Callable[[np.ndarray], np.ndarray]
    eval_m2: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    label: str

    def _check_domain(self, x: np.ndarray) -> None:
        lo, hi = self.domain
        xmin = np.min(x)
        xmax = np.max(x)
        if xmin <= lo or xmax >= hi:
            raise DomainError(
                f"profile '{self.label}' is defined on the open interval "
                f"({lo}, {hi}); got points in [{xmin}, {xmax}]"
            )

    def m(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        return self.eval_m(x)

    def m1(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        return self.eval_m1(x)

    def m2(self, x):
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        return self.eval_m2(x)

    def inv_sqrt_m_d1(self, x):
        """First derivative of m^(-1/2), from analytic m and m'."""
        return -self.m1(x) / (2.0 * self.m(x) ** 1.5)

    def inv_sqrt_m_d2(self, x):
        """Second derivative of m^(-1/2)."""
        m = self.m(x)
        m1 = self.m1(x)
        m2 = self.m2(x)
        return -m2 / (2.0 * m**1.5) + 0.75 * m1**2 * m**-2.5


def constant_profile(m0: float) -> MassProfile:
    """m(x) = m0 everywhere."""
    if m0 <= 0:
        raise InvalidArgumentError(f"constant mass must be positive, got {m0}")
    return MassProfile(
        eval_m=lambda x: np.full_like(x, m0, dtype=float),
        eval_m1=lambda x: np.zeros_like(x, dtype=float),
        eval_m2=lambda x: np.zeros_like(x, dtype=float),
        domain=(-np.inf, np.inf),
        label=f"constant(m0={m0})",
    )


def quadratic_profile(m0: float) -> MassProfile:
    """m(x) = x^2/2 + m0."""
    if m0 <= 0:
        raise InvalidArgumentError(f"quadratic profile needs m0 > 0, got {m0}")
    return MassProfile(
        eval_m=lambda x: 0.5 * x**2 + m0,
        eval_m1=lambda x: np.asarray(x, dtype=float).copy(),
        eval_m2=lambda x: np.ones_like(x, dtype=float),
        domain=(-np.inf, np.inf),
        label=f"quadratic(m0={m0})",
    )


def cosine_profile(m0: float) -> MassProfile:
    """m(x) = cos(x) + m0, requiring m0 > 1 so the mass stays positive."""
    if m0 <= 1.0:
        raise InvalidArgumentError(
            f"cosine profile needs m0 > 1 (mass would touch zero), got {m0}"
        )
    return MassProfile(
        eval_m=lambda x: np.cos(x) + m0,
        eval_m1=lambda x: -np.sin(x),
        eval_m2=lambda x: -np.cos(x),
        domain=(-np.inf, np.inf),
        label=f"cosine(m0={m0})",
    )


def linear_profile() -> MassProfile:
    """m(x) = x on (0, inf); the mass vanishes at the origin."""
    return MassProfile(
        eval_m=lambda x: np.asarray(x, dtype=float).copy(),
        eval_m1=lambda x: np.ones_like(x, dtype=float),
        eval_m2=lambda x: np.zeros_like(x, dtype=float),
        domain=(0.0, np.inf),
        label="linear",
    )


def tabulated_profile(x_samples, m_samples, label: str = "tabulated") -> MassProfile:
    """Profile from (x, m) samples, cubic-interpolated.

    Cubic interpolation is the minimum smoothness that still provides a
    meaningful m''; at least 16 strictly increasing samples with m > 0 are
    required.
    """
    x_samples = np.asarray(x_samples, dtype=float)
    m_samples = np.asarray(m_samples, dtype=float)
    if x_samples.ndim != 1 or x_samples.shape != m_samples.shape:
        raise InvalidArgumentError("samples must be two equal-length 1-D arrays")
    if len(x_samples) < 16:
        raise InvalidArgumentError(
            f"tabulated profile needs at least 16 samples, got {len(x_samples)}"
        )
    if np.any(np.diff(x_samples) <= 0):
        raise InvalidArgumentError("sample abscissae must be strictly increasing")
    if np.any(m_samples <= 0):
        raise InvalidArgumentError("all mass samples must be positive")
    spline = CubicSpline(x_samples, m_samples)
    return MassProfile(
        eval_m=lambda x: spline(x),
        eval_m1=lambda x: spline(x, 1),
        eval_m2=lambda x: spline(x, 2),
        domain=(float(x_samples[0]), float(x_samples[-1])),
        label=label,
    )


def load_profile_csv(path) -> MassProfile:
    """Read a two-column CSV with header ``x,m`` into a tabulated profile."""
    xs, ms = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["x", "m"]:
            raise InvalidArgumentError(f"{path}: expected header 'x,m'")
        for row in reader:
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                ms.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise InvalidArgumentError(f"{path}: bad row {row!r}") from exc
    return tabulated_profile(np.array(xs), np.array(ms), label=f"tabulated({path})")


@dataclass(frozen=True)
class OrderingParameters:
    """von Roos kinetic-ordering constants, constrained to sum to -1."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        total = self.alpha + self.beta + self.gamma
        if abs(total + 1.0) > _ORDERING_TOL:
            raise InvalidArgumentError(
                f"ordering constants must satisfy alpha+beta+gamma = -1; "
                f"got sum {total}"
            )


#: The kinetic ordering (1/2) p (1/m) p, for which V_eff coincides with V.
BDD_ORDERING = OrderingParameters(alpha=0.0, beta=-1.0, gamma=0.0)


def _ordering_correction(profile: MassProfile, ordering: OrderingParameters,
                         x: np.ndarray, hbar: float) -> np.ndarray:
    m = profile.m(x)
    m1 = profile.m1(x)
    m2 = profile.m2(x)
    a, b = ordering.alpha, ordering.beta
    coeff = a * a + a * b + a + b + 1.0
    return hbar**2 * (
        (1.0 + b) * m2 / (4.0 * m**2) - m1**2 / (2.0 * m**3) * coeff
    )


def veff_from_ordering(
    potential: SampledFunction,
    profile: MassProfile,
    ordering: OrderingParameters,
    hbar: float = 1.0,
) -> SampledFunction:
    """Effective potential of the two-term kinetic form for a given ordering."""
    corr = _ordering_correction(profile, ordering, potential.grid.points, hbar)
    return potential.with_values(potential.values + corr, potential.mask)


def v_from_veff(
    v_eff: SampledFunction,
    profile: MassProfile,
    ordering: OrderingParameters,
    hbar: float = 1.0,
) -> SampledFunction:
    """Exact inverse of :func:`veff_from_ordering`."""
    corr = _ordering_correction(profile, ordering, v_eff.grid.points, hbar)
    return v_eff.with_values(v_eff.values - corr, v_eff.mask)
