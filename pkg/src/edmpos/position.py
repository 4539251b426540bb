"""Closed-form receiver position recovery from a feasible squared-range vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .consistency import as_vector
from .edm_core import EdmBundle, SatelliteConfig
from .errors import BadShape, GaleInfeasible, SingularGeometry

DEFAULT_GALE_TOL = 1e-8
GALE_NORM_FLOOR = 1e-6


@dataclass(frozen=True)
class PositionFix:
    """Recovered receiver position with its consistency cross-checks.

    qtq_direct is |q|^2 computed from the recovered coordinates; qtq_identity
    is the same quantity read off the feasible vector as mean(y - b).  The two
    agree to round-off exactly when y came from a real point.
    """

    q_centered: np.ndarray
    q_world: np.ndarray
    qtq_direct: float
    qtq_identity: float
    gale_feasible: bool
    gale_residual: float

    def to_dict(self) -> dict:
        return {
            "q_world_m": self.q_world.tolist(),
            "q_centered": self.q_centered.tolist(),
            "qtq_direct": self.qtq_direct,
            "qtq_identity": self.qtq_identity,
            "gale_feasible": self.gale_feasible,
            "gale_residual": self.gale_residual,
        }


@dataclass(frozen=True)
class ResidualReport:
    """Discrepancy between a fix and a reference squared-range vector."""

    max_abs_scaled: float
    range_residuals_m: np.ndarray
    rms_range_m: float


def recover_position(
    y_star,
    bundle: EdmBundle,
    config: SatelliteConfig,
    gale_tol: float = DEFAULT_GALE_TOL,
) -> PositionFix:
    """Solve 2 P q = |q|^2 * 1 + b - y for the unique receiver point q.

    The system is consistent only when y - b lies in the column space of
    [P 1]; for n > r+1 that is checked through the null-space residual and a
    violation raises GaleInfeasible.  Multiplying out the ones-component gives
    |q|^2 = mean(y - b) and the remaining least-squares system is solved
    through a QR factorization of P.
    """
    y = as_vector(y_star, bundle.n)
    if config.n != bundle.n:
        raise BadShape(f"configuration has {config.n} anchors, bundle has {bundle.n}")
    z = bundle.b - y
    if bundle.Z.shape[1] > 0:
        znorm = float(np.linalg.norm(z))
        # floor the normalization at a fraction of |b|: when y lands on b the
        # difference is pure round-off and a z-relative residual would read
        # structural infeasibility into noise
        ref = max(znorm, GALE_NORM_FLOOR * float(np.linalg.norm(bundle.b)))
        gale_res = float(np.abs(bundle.Z.T @ z).max()) / ref if ref > 0.0 else 0.0
        if gale_res > gale_tol:
            raise GaleInfeasible(
                f"relative null-space residual {gale_res:.3e} exceeds {gale_tol:.1e}; "
                "no point realizes this squared-range vector"
            )
    else:
        gale_res = 0.0
    # demean first: the |q|^2 * 1 component would otherwise sit in the
    # least-squares residual and amplify conditioning error
    zmean = z.mean()
    zc = z - zmean
    Q, R = np.linalg.qr(config.P)
    rdiag = np.abs(np.diag(R))
    if rdiag.min() <= 1e-12 * max(rdiag.max(), 1e-300):
        raise SingularGeometry("anchor matrix is numerically rank deficient")
    q = 0.5 * solve_triangular(R, Q.T @ zc, check_finite=False)
    qtq_identity = float(-zmean)
    q_world = q / config.scale + config.centroid
    return PositionFix(
        q_centered=q,
        q_world=q_world,
        qtq_direct=float(q @ q),
        qtq_identity=qtq_identity,
        gale_feasible=True,
        gale_residual=gale_res,
    )


def verify_fix(fix: PositionFix, y_ref, config: SatelliteConfig) -> ResidualReport:
    """Recompute squared ranges at the fix and compare against a reference vector.

    Pass the solver's feasible vector to confirm the fix reproduces it, or the
    raw measurement to see per-anchor range errors in meters.
    """
    y = as_vector(y_ref, config.n)
    diff = config.P - fix.q_centered
    y_hat = np.einsum("ij,ij->i", diff, diff)
    ranges_hat = np.sqrt(y_hat) / config.scale
    ranges_ref = np.sqrt(np.maximum(y, 0.0)) / config.scale
    resid = ranges_hat - ranges_ref
    return ResidualReport(
        max_abs_scaled=float(np.abs(y_hat - y).max()),
        range_residuals_m=resid,
        rms_range_m=float(np.sqrt(np.mean(resid**2))),
    )
