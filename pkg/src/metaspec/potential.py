"""Confining Morse potentials with exact derivatives and critical-point search.

Three concrete families are supported, all with closed-form (or per-segment
analytic) gradients and Hessians:

* ``polynomial``      -- multivariate coefficient table, dimension 1 or 2
* ``gaussian_wells``  -- sum of Gaussian wells plus quadratic confinement
* ``tabulated1d``     -- cubic-spline interpolation of 1D samples

A phase-space wrapper ``PhaseSpaceField`` lifts a 1D potential V to
phi(x, y) = y^2/2 + V(x), whose critical structure mirrors that of V.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import CubicSpline


class DegenerateCriticalPointError(RuntimeError):
    """A converged critical point has a (numerically) singular Hessian."""


class NoCriticalPointsError(RuntimeError):
    """Newton search found no critical points inside the box."""


def _as_box(box, dimension):
    b = np.atleast_2d(np.asarray(box, dtype=float))
    if b.shape != (dimension, 2):
        raise ValueError(f"box must have shape ({dimension}, 2), got {b.shape}")
    if np.any(b[:, 1] <= b[:, 0]):
        raise ValueError("box upper bounds must exceed lower bounds")
    return b


class ScalarField:
    """Base class: a smooth scalar potential with exact derivatives."""

    dimension: int
    family: str

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def _check_point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            raise ValueError(
                f"point has shape {x.shape}, field dimension is {self.dimension}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("point must be finite")
        return x

    def evaluate(self, x):
        """Return ``(value, gradient, hessian)`` at ``x``."""
        x = self._check_point(x)
        return self.value(x), self.gradient(x), self.hessian(x)

    def value_batch(self, pts) -> np.ndarray:
        """Vectorized evaluation of an (m, dimension) array of points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.array([self.value(p) for p in pts])


class PolynomialField(ScalarField):
    """Polynomial potential from a coefficient table.

    1D: ``coeffs[k]`` multiplies x^k.  2D: ``coeffs[i, j]`` multiplies
    x1^i * x2^j.
    """

    family = "polynomial"

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim not in (1, 2):
            raise ValueError("coeffs must be a 1D or 2D coefficient table")
        self.coeffs = c
        self.dimension = c.ndim
        if self.dimension == 1:
            self._d1 = npoly.polyder(c)
            self._d2 = npoly.polyder(c, 2)
        else:
            self._dx = npoly.polyder(c, axis=0)
            self._dy = npoly.polyder(c, axis=1)
            self._dxx = npoly.polyder(c, 2, axis=0)
            self._dyy = npoly.polyder(c, 2, axis=1)
            self._dxy = npoly.polyder(self._dx, axis=1)

    def value(self, x):
        x = self._check_point(x)
        if self.dimension == 1:
            return float(npoly.polyval(x[0], self.coeffs))
        return float(npoly.polyval2d(x[0], x[1], self.coeffs))

    def gradient(self, x):
        x = self._check_point(x)
        if self.dimension == 1:
            return np.array([npoly.polyval(x[0], self._d1)])
        return np.array(
            [npoly.polyval2d(x[0], x[1], self._dx),
             npoly.polyval2d(x[0], x[1], self._dy)]
        )

    def hessian(self, x):
        x = self._check_point(x)
        if self.dimension == 1:
            return np.array([[npoly.polyval(x[0], self._d2)]])
        hxx = npoly.polyval2d(x[0], x[1], self._dxx)
        hyy = npoly.polyval2d(x[0], x[1], self._dyy)
        hxy = npoly.polyval2d(x[0], x[1], self._dxy)
        return np.array([[hxx, hxy], [hxy, hyy]])

    def value_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.dimension == 1:
            return npoly.polyval(pts[:, 0], self.coeffs)
        return npoly.polyval2d(pts[:, 0], pts[:, 1], self.coeffs)


class GaussianWellsField(ScalarField):
    """Gaussian wells plus quadratic confinement.

    V(x) = 0.5 * confinement * |x|^2 - sum_k depth_k * exp(-|x - c_k|^2 / (2 w_k^2))
    """

    family = "gaussian_wells"

    def __init__(self, centers, depths, widths, confinement):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.centers = centers
        self.depths = np.asarray(depths, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.confinement = float(confinement)
        if self.confinement <= 0:
            raise ValueError("confinement coefficient must be positive")
        if np.any(self.widths <= 0):
            raise ValueError("well widths must be positive")
        if not (len(self.depths) == len(self.widths) == centers.shape[0]):
            raise ValueError("centers, depths, widths must have equal length")
        self.dimension = centers.shape[1]

    def _gaussians(self, x):
        d = x[None, :] - self.centers
        r2 = np.sum(d * d, axis=1)
        g = self.depths * np.exp(-r2 / (2.0 * self.widths**2))
        return d, g

    def value(self, x):
        x = self._check_point(x)
        _, g = self._gaussians(x)
        return float(0.5 * self.confinement * np.dot(x, x) - np.sum(g))

    def gradient(self, x):
        x = self._check_point(x)
        d, g = self._gaussians(x)
        grad = self.confinement * x.copy()
        grad += np.sum((g / self.widths**2)[:, None] * d, axis=0)
        return grad

    def hessian(self, x):
        x = self._check_point(x)
        d, g = self._gaussians(x)
        n = self.dimension
        hess = self.confinement * np.eye(n)
        for k in range(len(g)):
            w2 = self.widths[k] ** 2
            dk = d[k]
            hess += (g[k] / w2) * (np.eye(n) - np.outer(dk, dk) / w2)
        return hess

    def value_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = 0.5 * self.confinement * np.sum(pts * pts, axis=1)
        for k in range(len(self.depths)):
            d = pts - self.centers[k]
            r2 = np.sum(d * d, axis=1)
            out -= self.depths[k] * np.exp(-r2 / (2.0 * self.widths[k] ** 2))
        return out


class Tabulated1DField(ScalarField):
    """Cubic-spline interpolation of tabulated 1D samples."""

    family = "tabulated1d"
    dimension = 1

    def __init__(self, knots, values, bc_type="natural"):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape:
            raise ValueError("knots and values must be 1D arrays of equal length")
        self.knots = knots
        self.values_at_knots = values
        self.spline = CubicSpline(knots, values, bc_type=bc_type)
        self._d1 = self.spline.derivative(1)
        self._d2 = self.spline.derivative(2)

    def value(self, x):
        x = self._check_point(x)
        return float(self.spline(x[0]))

    def gradient(self, x):
        x = self._check_point(x)
        return np.array([float(self._d1(x[0]))])

    def hessian(self, x):
        x = self._check_point(x)
        return np.array([[float(self._d2(x[0]))]])


    def value_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.spline(pts[:, 0])

    def derivative_roots(self):
        """Per-segment analytic roots of V' inside the knot range."""
        r = self._d1.roots(extrapolate=False)
        r = np.real(r[np.isreal(r)])
        return np.sort(r)


class PhaseSpaceField(ScalarField):
    """phi(x, y) = y^2/2 + V(x) for a 1D potential V."""

    family = "phase_space"

    def __init__(self, v_field: ScalarField):
        if v_field.dimension != 1:
            raise ValueError("PhaseSpaceField requires a 1D potential")
        self.v_field = v_field
        self.dimension = 2

    def value(self, x):
        x = self._check_point(x)
        return self.v_field.value(x[:1]) + 0.5 * x[1] ** 2

    def gradient(self, x):
        x = self._check_point(x)
        g = self.v_field.gradient(x[:1])
        return np.array([g[0], x[1]])

    def hessian(self, x):
        x = self._check_point(x)
        h = self.v_field.hessian(x[:1])
        return np.array([[h[0, 0], 0.0], [0.0, 1.0]])

    def value_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.v_field.value_batch(pts[:, :1]) + 0.5 * pts[:, 1] ** 2


def field_from_config(spec: dict) -> ScalarField:
    """Build a field from a config mapping (CLI entry point)."""
    family = spec.get("family")
    if family == "polynomial":
        return PolynomialField(spec["coeffs"])
    if family == "gaussian_wells":
        return GaussianWellsField(
            spec["centers"], spec["depths"], spec["widths"], spec["confinement"]
        )
    if family == "tabulated1d":
        return Tabulated1DField(spec["knots"], spec["values"])
    raise ValueError(f"unknown potential family: {family!r}")


@dataclass(frozen=True)
class CriticalPoint:
    """A nondegenerate critical point of a scalar field."""

    id: int
    location: np.ndarray
    value: float
    hessian: np.ndarray
    morse_index: int

    @property
    def is_minimum(self) -> bool:
        return self.morse_index == 0

    @property
    def is_saddle(self) -> bool:
        return self.morse_index == 1


def _newton(field, x0, box, newton_tol, max_iter=100):
    """Damped Newton iteration for grad V = 0; returns point or None."""
    x = np.array(x0, dtype=float)
    diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    step_cap = 0.25 * diam
    for _ in range(max_iter):
        g = field.gradient(x)
        if np.linalg.norm(g) <= newton_tol:
            return x
        h = field.hessian(x)
        # Shift the Hessian only to get a usable step, never for classification.
        shift = 0.0
        for _ in range(12):
            try:
                step = np.linalg.solve(h + shift * np.eye(len(x)), -g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                break
            shift = max(2.0 * shift, 1e-8 * (1.0 + abs(np.trace(h))))
        else:
            return None
        norm = np.linalg.norm(step)
        if norm > step_cap:
            step *= step_cap / norm
        x = x + step
        if np.any(x < box[:, 0] - 0.5 * diam) or np.any(x > box[:, 1] + 0.5 * diam):
            return None
    return None


def find_critical_points(
    field: ScalarField,
    box,
    seeds_per_axis: int = 33,
    newton_tol: float = 1e-10,
    degeneracy_tol: float = 1e-8,
    dedupe_radius: float | None = None,
    strict: bool = True,
) -> list[CriticalPoint]:
    """Locate and classify all critical points of ``field`` inside ``box``.

    Newton iterations start from a uniform seed grid (for tabulated-1d the
    seeds are the analytic roots of the spline derivative).  Converged points
    are deduplicated, classified by the exact Hessian spectrum, and sorted by
    value then lexicographic location.

    Raises ``DegenerateCriticalPointError`` when a converged point fails the
    nondegeneracy test (unless ``strict=False``, where the point is kept with
    its index so that `verify_morse_and_confinement` can report the failure),
    and ``NoCriticalPointsError`` when nothing converges.
    """
    box = _as_box(box, field.dimension)
    if dedupe_radius is None:
        dedupe_radius = 1e-6 * float(np.linalg.norm(box[:, 1] - box[:, 0]))

    if isinstance(field, Tabulated1DField):
        seeds = [np.array([r]) for r in field.derivative_roots()
                 if box[0, 0] <= r <= box[0, 1]]
    else:
        axes = [np.linspace(lo, hi, seeds_per_axis) for lo, hi in box]
        mesh = np.meshgrid(*axes, indexing="ij")
        seeds = np.stack([m.ravel() for m in mesh], axis=1)

    converged = []
    n_failed = 0
    for s in seeds:
        x = _newton(field, s, box, newton_tol)
        if x is None:
            n_failed += 1
            continue
        if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
            continue
        converged.append(x)
    if not converged:
        raise NoCriticalPointsError(
            f"no critical points found in box (Newton failed at {n_failed} seeds)"
        )

    # Deterministic dedupe: sort candidates, merge within dedupe_radius.
    converged.sort(key=lambda p: tuple(p))
    unique: list[np.ndarray] = []
    for x in converged:
        if all(np.linalg.norm(x - u) > dedupe_radius for u in unique):
            unique.append(x)

    records = []
    for x in unique:
        val = field.value(x)
        hess = field.hessian(x)
        eigs = np.linalg.eigvalsh(0.5 * (hess + hess.T))
        if np.min(np.abs(eigs)) < degeneracy_tol:
            if strict:
                raise DegenerateCriticalPointError(
                    f"degenerate Hessian at {x} (|eig|_min = {np.min(np.abs(eigs)):.3e}); "
                    "potential is not Morse"
                )
        records.append((val, tuple(x), x, hess, int(np.sum(eigs < 0.0))))

    records.sort(key=lambda r: (r[0], r[1]))
    return [
        CriticalPoint(id=i, location=x, value=float(val), hessian=hess,
                      morse_index=idx)
        for i, (val, _, x, hess, idx) in enumerate(records)
    ]


@dataclass
class MorseReport:
    """Outcome of the Morse/confinement verification."""

    all_nondegenerate: bool
    min_shell_gradient: float
    n0: int
    n1: int
    counts_by_index: dict = field(default_factory=dict)
    degenerate_ids: list = field(default_factory=list)
    max_gradient_at_points: float = 0.0


def verify_morse_and_confinement(
    field: ScalarField,
    points: list[CriticalPoint],
    box,
    degeneracy_tol: float = 1e-8,
    shell_samples: int = 128,
) -> MorseReport:
    """Check nondegeneracy of ``points`` and sample |grad V| on the box shell."""
    box = _as_box(box, field.dimension)

    degenerate = []
    counts: dict[int, int] = {}
    max_grad = 0.0
    for p in points:
        eigs = np.linalg.eigvalsh(0.5 * (p.hessian + p.hessian.T))
        if np.min(np.abs(eigs)) < degeneracy_tol:
            degenerate.append(p.id)
        counts[p.morse_index] = counts.get(p.morse_index, 0) + 1
        max_grad = max(max_grad, float(np.linalg.norm(field.gradient(p.location))))

    if field.dimension == 1:
        shell = [np.array([box[0, 0]]), np.array([box[0, 1]])]
    else:
        ts = np.linspace(0.0, 1.0, max(2, shell_samples // 4))
        shell = []
        (x0, x1), (y0, y1) = box
        for t in ts:
            shell.append(np.array([x0 + t * (x1 - x0), y0]))
            shell.append(np.array([x0 + t * (x1 - x0), y1]))
            shell.append(np.array([x0, y0 + t * (y1 - y0)]))
            shell.append(np.array([x1, y0 + t * (y1 - y0)]))
    min_shell = min(float(np.linalg.norm(field.gradient(s))) for s in shell)

    return MorseReport(
        all_nondegenerate=not degenerate,
        min_shell_gradient=min_shell,
        n0=counts.get(0, 0),
        n1=counts.get(1, 0),
        counts_by_index=counts,
        degenerate_ids=degenerate,
        max_gradient_at_points=max_grad,
    )
