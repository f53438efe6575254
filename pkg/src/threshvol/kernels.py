"""One-sided kernel weights and their moments.

Every asymptotic constant in the package is a rational expression in the
moments ``m(i, j) = integral_0^inf u^j K(u)^i du`` of a one-sided kernel
(support ``[0, support_upper]``, unit mass).  Built-in kernels carry exact
closed-form moment tables; an adaptive quadrature route is kept as an
independent cross-check and as the fallback for custom kernels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DataError, QuadratureError

BUILTIN_KERNELS = ("one_sided_epanechnikov", "one_sided_uniform")

QUAD_ABS_TOL = 1e-12
QUAD_MAX_SUBDIVISIONS = 60


@dataclass(frozen=True)
class KernelSpec:
    """A one-sided kernel: nonnegative weight on [0, support_upper], unit mass.

    ``eval_fn`` must be vectorized and return 0 outside the support (including
    all negative arguments).  ``closed_form_moments`` maps (i, j) to the exact
    moment when one is known; ``knots``/``knot_values`` are set for tabulated
    kernels and drive an exact piecewise quadrature.
    """

    name: str
    support_upper: float
    eval_fn: Callable[[np.ndarray], np.ndarray]
    closed_form_moments: Mapping[tuple[int, int], float] = field(default_factory=dict)
    knots: Optional[np.ndarray] = None
    knot_values: Optional[np.ndarray] = None

    def __call__(self, u) -> np.ndarray:
        return self.eval_fn(np.asarray(u, dtype=float))

    def moment(self, i: int, j: int) -> float:
        return kernel_moment(self, i, j)


def _epanechnikov_moment(i: int, j: int) -> Fraction:
    # integral_0^1 u^j (3/2)^i (1-u^2)^i du, expanded binomially
    total = Fraction(0)
    for m in range(i + 1):
        total += Fraction((-1) ** m * comb(i, m), j + 2 * m + 1)
    return Fraction(3, 2) ** i * total


def _builtin_moment_table(name: str) -> dict[tuple[int, int], float]:
    table: dict[tuple[int, int], float] = {}
    for i in (1, 2, 3, 4):
        for j in range(0, 8):
            if name == "one_sided_epanechnikov":
                table[(i, j)] = float(_epanechnikov_moment(i, j))
            else:
                table[(i, j)] = 1.0 / (j + 1)
    return table


def _epanechnikov_eval(u: np.ndarray) -> np.ndarray:
    inside = (u >= 0.0) & (u <= 1.0)
    return np.where(inside, 1.5 * (1.0 - u * u), 0.0)


def _uniform_eval(u: np.ndarray) -> np.ndarray:
    inside = (u >= 0.0) & (u <= 1.0)
    return np.where(inside, 1.0, 0.0)


def builtin_kernel(name: str) -> KernelSpec:
    """Return a built-in kernel by name.

    ``one_sided_epanechnikov`` is 1.5*(1 - u^2) on [0, 1] (the unit-mass
    parabolic kernel on the positive axis); ``one_sided_uniform`` is the
    indicator of [0, 1].
    """
    if name == "one_sided_epanechnikov":
        ev = _epanechnikov_eval
    elif name == "one_sided_uniform":
        ev = _uniform_eval
    else:
        raise ConfigError(
            f"unknown kernel {name!r}; available: {', '.join(BUILTIN_KERNELS)}"
        )
    return KernelSpec(
        name=name,
        support_upper=1.0,
        eval_fn=ev,
        closed_form_moments=_builtin_moment_table(name),
    )


def _segmentwise_polynomial_moment(spec: KernelSpec, i: int, j: int) -> float:
    """Exact moment of a tabulated (piecewise-linear) kernel.

    On each knot interval K(u)^i * u^j is a polynomial of degree i + j, so
    Gauss-Legendre with enough nodes integrates it exactly.
    """
    us = spec.knots
    ks = spec.knot_values
    npts = max(5, (i + j) // 2 + 1)
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    a = us[:-1]
    half = 0.5 * np.diff(us)
    # map nodes onto every segment at once: shape (nseg, npts)
    uu = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
    slope = np.diff(ks) / np.diff(us)
    kk = ks[:-1, None] + slope[:, None] * (uu - a[:, None])
    vals = (kk**i) * (uu**j)
    return float(np.sum(half[:, None] * weights[None, :] * vals))


def kernel_moment(spec: KernelSpec, i: int, j: int) -> float:
    """Moment integral_0^support u^j K(u)^i du.

    Uses the closed-form table when available; tabulated kernels integrate
    exactly segment by segment; otherwise adaptive quadrature at absolute
    tolerance 1e-12 (error if that tolerance is not reached).
    """
    if i < 1 or j < 0:
        raise ConfigError(f"kernel moment orders must satisfy i >= 1, j >= 0; got ({i}, {j})")
    key = (i, j)
    if key in spec.closed_form_moments:
        return spec.closed_form_moments[key]
    if spec.knots is not None:
        return _segmentwise_polynomial_moment(spec, i, j)
    return quadrature_moment(spec, i, j)


def quadrature_moment(spec: KernelSpec, i: int, j: int) -> float:
    """Adaptive Gauss-Kronrod evaluation of the moment, ignoring any table.

    Kept separate so closed forms can be cross-checked against an
    independent route.
    """
    def f(u: float) -> float:
        return float(spec.eval_fn(np.asarray([u]))[0]) ** i * u**j

    val, abserr = quad(
        f, 0.0, spec.support_upper, epsabs=QUAD_ABS_TOL, epsrel=0.0,
        limit=QUAD_MAX_SUBDIVISIONS,
    )
    if abserr > 1e-10:
        raise QuadratureError(
            f"kernel moment ({i},{j}) quadrature reached abs error {abserr:.3e} > 1e-10",
            achieved_tol=abserr,
        )
    return val


def kernel_from_table(
    us, ks, name: str = "tabulated", normalize: bool = False, mass_tol: float = 1e-6
) -> KernelSpec:
    """Build a kernel from tabulated (u, K(u)) pairs with linear interpolation.

    The grid must be strictly increasing and start at 0.  Unit mass is
    checked; pass ``normalize=True`` to rescale explicitly instead of
    failing.
    """
    us = np.asarray(us, dtype=float)
    ks = np.asarray(ks, dtype=float)
    if us.ndim != 1 or us.shape != ks.shape or us.size < 2:
        raise DataError("tabulated kernel needs matching 1-d u and k arrays with >= 2 rows")
    if us[0] != 0.0:
        raise DataError(f"tabulated kernel grid must start at u=0, got {us[0]!r}")
    if np.any(np.diff(us) <= 0):
        raise DataError("tabulated kernel grid must be strictly increasing")
    if np.any(ks < 0):
        raise DataError("tabulated kernel weights must be nonnegative")
    mass = float(np.trapezoid(ks, us))
    if normalize:
        if mass <= 0:
            raise DataError("tabulated kernel has zero mass; cannot normalize")
        ks = ks / mass
    elif abs(mass - 1.0) > mass_tol:
        raise DataError(
            f"tabulated kernel mass is {mass:.12g}, not 1 within {mass_tol:g}; "
            "pass normalize=True to rescale"
        )
    upper = float(us[-1])

    def ev(u: np.ndarray) -> np.ndarray:
        return np.interp(u, us, ks, left=0.0, right=0.0)

    return KernelSpec(
        name=name, support_upper=upper, eval_fn=ev, knots=us, knot_values=ks
    )


def load_kernel_csv(path, name: str = "custom", normalize: bool = False) -> KernelSpec:
    """Read a custom kernel from a CSV file with header ``u,k``."""
    us: list[float] = []
    ks: list[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read kernel file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["u", "k"]:
            raise DataError(f"{path}: expected header 'u,k', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                us.append(float(row[0]))
                ks.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: cannot parse row {lineno}: {row!r}") from exc
    if len(us) < 2:
        raise DataError(f"{path}: need at least 2 rows")
    return kernel_from_table(us, ks, name=name, normalize=normalize)


def resolve_kernel(name_or_spec) -> KernelSpec:
    """Accept a KernelSpec or a builtin name and return the KernelSpec."""
    if isinstance(name_or_spec, KernelSpec):
        return name_or_spec
    return builtin_kernel(str(name_or_spec))
