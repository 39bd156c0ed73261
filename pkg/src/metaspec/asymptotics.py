"""Small-eigenvalue asymptotics from saddle and minimum data.

For a kinetic (phase-space) operator with friction gamma, the escape rate at
an index-1 saddle is the magnitude lambda_hat of the unique real negative
eigenvalue of the 2d x 2d block matrix

    [[0, I], [-V''(s), gamma I]]

(in 1D: lambda_hat = sqrt((gamma/2)^2 + v) - gamma/2 with v = -V''(s), the
negative root of lambda^2 - gamma lambda - v = 0).  The leading prefactor of
the k-th exponentially small eigenvalue is

    l_k0 = (lambda_hat / pi) * sqrt(det V''(m_k) / (-det V''(s_j)))

and mu_k(h) = h * l_k0 * exp(-2 S_k / h).  The self-adjoint (Witten)
specialization replaces lambda_hat by the magnitude of the negative Hessian
eigenvalue at the saddle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import CriticalPoint
from .topology import LabelledMinimum


@dataclass
class SaddleRate:
    """Escape rate data at one index-1 saddle."""

    lambda_hat: float
    block_matrix: np.ndarray
    gamma: float
    v: float


@dataclass
class QuadraticPhase:
    """Outgoing quadratic phase phi_+ = (a x^2 + 2 b x y + c y^2)/2 at a 1D
    kinetic saddle, and the geometric constant kappa11."""

    a: float
    b: float
    c: float
    kappa11: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    def half_symmetrized_hessian(self) -> np.ndarray:
        # (phi_+ + phi_+ o kappa)''/2 with kappa: (x, y) -> (x, -y)
        return np.array([[self.a, 0.0], [0.0, self.c]])


@dataclass
class AsymptoticEigenvalue:
    """Per-minimum asymptotic record: mu_k(h) = h * l0 * exp(-2 S_k / h)."""

    minimum_label: tuple
    minimum_id: int
    S_k: float
    prefactor_l0: float | None
    b0_magnitude: float | None
    assigned_saddle_id: int | None
    generic: bool = True

    def mu(self, h):
        """Evaluate the asymptotic eigenvalue; the exponent-only bracket
        h * exp(-2 S_k / h) in the non-generic case."""
        h = np.asarray(h, dtype=float)
        if math.isinf(self.S_k):
            return np.zeros_like(h) if h.ndim else 0.0
        amp = self.prefactor_l0 if (self.generic and self.prefactor_l0) else 1.0
        out = h * amp * np.exp(-2.0 * self.S_k / h)
        return out if h.ndim else float(out)


def lambda_hat(hess_at_saddle, gamma: float, imag_tol: float = 1e-10) -> SaddleRate:
    """Rate at an index-1 saddle from the full block eigenproblem."""
    h = np.atleast_2d(np.asarray(hess_at_saddle, dtype=float))
    h = 0.5 * (h + h.T)
    d = h.shape[0]
    eigs_h = np.linalg.eigvalsh(h)
    if np.sum(eigs_h < 0) != 1:
        raise ValueError(
            f"saddle Hessian must have exactly one negative eigenvalue, "
            f"got spectrum {eigs_h}"
        )
    if gamma <= 0:
        raise ValueError("friction gamma must be positive")
    block = np.zeros((2 * d, 2 * d))
    block[:d, d:] = np.eye(d)
    block[d:, :d] = -h
    block[d:, d:] = gamma * np.eye(d)
    spec = np.linalg.eigvals(block)
    neg = spec[spec.real < 0]
    if len(neg) != 1:
        raise ValueError(
            f"block matrix has {len(neg)} eigenvalues with negative real part "
            "(expected exactly one; input is not an index-1 saddle)"
        )
    lam = neg[0]
    if abs(lam.imag) > imag_tol * max(1.0, abs(lam.real)):
        raise ValueError(f"negative block eigenvalue is not real: {lam}")
    return SaddleRate(
        lambda_hat=float(-lam.real), block_matrix=block, gamma=float(gamma),
        v=float(-eigs_h[0]),
    )


def _det_ratio(hess_min, hess_saddle) -> float:
    hm = np.atleast_2d(np.asarray(hess_min, dtype=float))
    hs = np.atleast_2d(np.asarray(hess_saddle, dtype=float))
    det_m = np.linalg.det(hm)
    det_s = np.linalg.det(hs)
    ratio = det_m / (-det_s)
    if ratio <= 0:
        raise ValueError(
            f"determinant ratio det V''(m)/(-det V''(s)) = {ratio} is not positive"
        )
    return float(ratio)


def kfp_prefactor(hess_min, hess_saddle, gamma: float) -> float:
    """l0 = (lambda_hat / pi) sqrt(det V''(m) / (-det V''(s)))."""
    rate = lambda_hat(hess_saddle, gamma)
    return rate.lambda_hat / math.pi * math.sqrt(_det_ratio(hess_min, hess_saddle))


def witten_prefactor(hess_min, hess_saddle) -> float:
    """Friction-free specialization: the rate is the negative Hessian
    eigenvalue magnitude at the saddle."""
    hs = np.atleast_2d(np.asarray(hess_saddle, dtype=float))
    eigs = np.linalg.eigvalsh(0.5 * (hs + hs.T))
    if np.sum(eigs < 0) != 1:
        raise ValueError("saddle Hessian must have exactly one negative eigenvalue")
    return abs(eigs[0]) / math.pi * math.sqrt(_det_ratio(hess_min, hess_saddle))


def interaction_b0(hess_min, hess_saddle, gamma: float) -> float:
    """|b0| with |b0|^2 equal to the kinetic prefactor l0 (sign undetermined)."""
    rate = lambda_hat(hess_saddle, gamma)
    return (
        math.pi ** -0.5
        * math.sqrt(rate.lambda_hat)
        * _det_ratio(hess_min, hess_saddle) ** 0.25
    )


def quadratic_phase(v: float, gamma: float) -> QuadraticPhase:
    """Positive-definite solution of the saddle eikonal equation, 1D kinetic
    case, with the constant kappa11 = gamma / sqrt(gamma^2 + 4 v)."""
    if v <= 0 or gamma <= 0:
        raise ValueError("v and gamma must be positive")
    c = math.sqrt(1.0 + 4.0 * v / gamma**2)
    b = -2.0 * v / gamma
    a = v * c
    kappa11 = gamma / math.sqrt(gamma**2 + 4.0 * v)
    phase = QuadraticPhase(a=a, b=b, c=c, kappa11=kappa11)
    if np.any(np.linalg.eigvalsh(phase.matrix()) <= 0):
        raise AssertionError("outgoing phase is not positive definite")
    return phase


def eikonal_residual(phase: QuadraticPhase, v: float, gamma: float, x, y):
    """q(x, y; dphi_+) for the 1D kinetic symbol; zero for the true phase."""
    xi = phase.a * x + phase.b * y
    eta = phase.b * x + phase.c * y
    return y * xi + v * x * eta + 0.5 * gamma * (eta**2 - y**2)


def endestim_prefactor(hess_min, hess_saddle_phi_plus_sym, lambda_hat_value: float,
                       kappa11: float) -> float:
    """General supersymmetric prefactor
    (1/pi) (lambda_hat / kappa11) sqrt(det phi''(m) / det sym-phase''(s))."""
    hm = np.atleast_2d(np.asarray(hess_min, dtype=float))
    hs = np.atleast_2d(np.asarray(hess_saddle_phi_plus_sym, dtype=float))
    eigs = np.linalg.eigvalsh(0.5 * (hs + hs.T))
    if np.any(eigs <= 0):
        raise ValueError("symmetrized outgoing-phase Hessian must be positive definite")
    ratio = np.linalg.det(hm) / np.linalg.det(hs)
    if ratio <= 0:
        raise ValueError("determinant ratio must be positive")
    return lambda_hat_value / (math.pi * kappa11) * math.sqrt(ratio)


def asymptotic_spectrum(
    labelling: list[LabelledMinimum],
    points: list[CriticalPoint],
    operator: str = "kfp",
    gamma: float | None = None,
    generic: bool = True,
) -> list[AsymptoticEigenvalue]:
    """One asymptotic record per labelled minimum.

    ``operator`` selects the kinetic ("kfp") or self-adjoint ("witten") rate;
    the kinetic case needs ``gamma``.  With ``generic=False`` the records
    carry only the exponent bracket h * exp(-2 S_k / h) (order of magnitude),
    matching the general-case statement.
    """
    if operator not in ("kfp", "witten"):
        raise ValueError(f"unknown operator {operator!r}")
    if operator == "kfp" and (gamma is None or gamma <= 0):
        raise ValueError("kinetic operator requires positive gamma")
    by_id = {p.id: p for p in points}

    out = []
    for rec in labelling:
        if math.isinf(rec.S_k):
            out.append(
                AsymptoticEigenvalue(
                    minimum_label=rec.label, minimum_id=rec.minimum_id,
                    S_k=math.inf, prefactor_l0=None, b0_magnitude=None,
                    assigned_saddle_id=None, generic=generic,
                )
            )
            continue
        if not generic:
            out.append(
                AsymptoticEigenvalue(
                    minimum_label=rec.label, minimum_id=rec.minimum_id,
                    S_k=rec.S_k, prefactor_l0=None, b0_magnitude=None,
                    assigned_saddle_id=rec.assigned_saddle_id, generic=False,
                )
            )
            continue
        if rec.assigned_saddle_id is None:
            raise ValueError(
                f"labelled minimum {rec.label} has no assigned saddle; "
                "cannot evaluate per-eigenvalue formulas in generic mode"
            )
        hess_m = by_id[rec.minimum_id].hessian
        hess_s = by_id[rec.assigned_saddle_id].hessian
        if operator == "kfp":
            l0 = kfp_prefactor(hess_m, hess_s, gamma)
            b0 = interaction_b0(hess_m, hess_s, gamma)
        else:
            l0 = witten_prefactor(hess_m, hess_s)
            b0 = math.sqrt(l0)
        out.append(
            AsymptoticEigenvalue(
                minimum_label=rec.label, minimum_id=rec.minimum_id,
                S_k=rec.S_k, prefactor_l0=l0, b0_magnitude=b0,
                assigned_saddle_id=rec.assigned_saddle_id, generic=True,
            )
        )
    return out
