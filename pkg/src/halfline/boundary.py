"""Self-adjoint boundary conditions at the origin.

A condition -B* psi(0) + A* psi'(0) = 0 is admissible when B*A = A*B and
A*A + B*B is positive definite. The diagonal family A = -diag(sin theta),
B = diag(cos theta) covers Dirichlet (theta = pi), Neumann (theta = pi/2)
and Robin conditions componentwise.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from . import linalg
from .errors import BoundaryConditionError

logger = logging.getLogger(__name__)

__all__ = ["BoundaryPair", "validate", "from_angles", "equivalent", "residual"]

_HERM_TOL = 1e-12
_POS_TOL = 1e-10
_ANGLE_SNAP = 1e-12


@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryPair:
    """Validated boundary matrices (A, B).

    thetas is set only when the pair came from the diagonal angle family;
    it unlocks the diagonal-only boundary term of the energy form.
    """

    a: np.ndarray
    b: np.ndarray
    dim: int
    thetas: tuple[float, ...] | None = None

    def __repr__(self):
        tag = f", thetas={self.thetas}" if self.thetas is not None else ""
        return f"BoundaryPair(dim={self.dim}{tag})"


def validate(a, b) -> BoundaryPair:
    """Check admissibility of (A, B) and return the immutable pair.

    Raises BoundaryConditionError with kind "hermiticity-violation" when
    B*A != A*B, or "positivity-violation" when A*A + B*B is not positive
    definite.
    """
    a = linalg.as_matrix(a)
    b = linalg.as_matrix(b, dim=a.shape[0])
    cross = linalg.adjoint(b) @ a
    herm_defect = float(linalg.frobenius_norm(cross - linalg.adjoint(cross)))
    if herm_defect > _HERM_TOL * max(1.0, float(linalg.frobenius_norm(cross))):
        raise BoundaryConditionError(
            f"B*A is not Hermitian: ||B*A - A*B|| = {herm_defect:.3e} exceeds {_HERM_TOL:g}.",
            kind="hermiticity-violation",
            residual=herm_defect,
        )
    gram = linalg.adjoint(a) @ a + linalg.adjoint(b) @ b
    eigenvalues, _ = linalg.eig_hermitian(gram)
    smallest = float(eigenvalues[0])
    if smallest <= _POS_TOL:
        raise BoundaryConditionError(
            f"A*A + B*B is not positive definite: smallest eigenvalue {smallest:.3e} "
            f"is below {_POS_TOL:g}.",
            kind="positivity-violation",
            residual=smallest,
        )
    return BoundaryPair(a=a.copy(), b=b.copy(), dim=a.shape[0])


def from_angles(thetas) -> BoundaryPair:
    """Diagonal boundary pair A = -diag(sin t), B = diag(cos t), t in (0, pi]."""
    angles = np.asarray(thetas, dtype=float)
    if angles.ndim != 1 or angles.size == 0:
        raise ValueError("thetas must be a non-empty 1-d sequence of angles.")
    if np.any(angles <= 0.0) or np.any(angles > np.pi):
        raise ValueError(f"each angle must lie in (0, pi]; got {angles.tolist()}.")
    sines = np.sin(angles)
    cosines = np.cos(angles)
    # snap near-Dirichlet angles so A is exactly zero there
    sines[np.abs(sines) < _ANGLE_SNAP] = 0.0
    cosines[np.abs(cosines) < _ANGLE_SNAP] = 0.0
    a = np.diag(-sines).astype(np.complex128)
    b = np.diag(cosines).astype(np.complex128)
    pair = validate(a, b)
    return dataclasses.replace(pair, thetas=tuple(float(t) for t in angles))


def equivalent(p: BoundaryPair, q: BoundaryPair) -> bool:
    """True when the two pairs define the same condition, i.e. the stacked
    columns of [A; B] span the same subspace (invariance under A -> AT, B -> BT)."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}.")
    stack_p = np.vstack([p.a, p.b])
    stack_q = np.vstack([q.a, q.b])
    joint = np.hstack([stack_p, stack_q])
    tol = 1e-10 * max(float(np.linalg.norm(joint)), 1.0)
    rank_p = np.linalg.matrix_rank(stack_p, tol=tol)
    rank_q = np.linalg.matrix_rank(stack_q, tol=tol)
    rank_joint = np.linalg.matrix_rank(joint, tol=tol)
    return bool(rank_p == rank_q == rank_joint)


def residual(p: BoundaryPair, value_at_0, derivative_at_0) -> float:
    """Norm of -B* v + A* v' with v, v' the value and derivative at x = 0.

    Accepts a vector or a matrix of stacked column solutions.
    """
    v = np.asarray(value_at_0, dtype=np.complex128)
    dv = np.asarray(derivative_at_0, dtype=np.complex128)
    if v.shape != dv.shape or v.shape[0] != p.dim:
        raise ValueError(f"value/derivative shapes {v.shape}/{dv.shape} do not match dim {p.dim}.")
    combo = -linalg.adjoint(p.b) @ v + linalg.adjoint(p.a) @ dv
    return float(np.linalg.norm(combo))
