"""Generalized Fourier maps, the exact linear propagator, and the energy form.

The physical solution Psi(k, x) = f(-k, x) + f(k, x) S(k) is sampled on the
(k, x) grid pair into one dense kernel holding Psi(-k, x). Both directions of
the transform are applies of that kernel:

    (F psi)(k)   = c  sum_j wx_j Psi(-k, x_j)^* psi(x_j)
    (F* phi)(x)  = c  sum_i wk_i Psi(-k_i, x)  phi(k_i),  c = 1/sqrt(2 pi)

sharing one quadrature rule, so the discrete adjoint pairing is exact by
construction. The propagator conjugates multiplication by e^{-i t k^2} with
these maps and is exact in t for the discrete transform.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np

from . import linalg
from ._quadrature import integration_weights
from .boundary import BoundaryPair
from .errors import BoundStatesPresentError
from .jost import JostTable, ScatteringData, bound_state_scan
from .potential import PotentialSpec, XGrid

logger = logging.getLogger(__name__)

__all__ = [
    "SpectralTransform",
    "physical_solution",
    "build_transform",
    "propagate_linear",
    "energy_form",
]

_NORM = 1.0 / math.sqrt(2.0 * math.pi)
_CHUNK = 512


def _values_of(psi):
    return psi.values if hasattr(psi, "values") else np.asarray(psi, dtype=np.complex128)


def _rewrap(psi, values):
    if hasattr(psi, "values"):
        return dataclasses.replace(psi, values=values)
    return values


def physical_solution(jt: JostTable, sd: ScatteringData, k: float, x: float) -> np.ndarray:
    """Psi(k, x) = f(-k, x) + f(k, x) S(k) for signed real k.

    Negative k uses S(-|k|) = S(|k|)^*, which the discrete scattering matrix
    satisfies to rounding.
    """
    s = sd.s_at(abs(k))
    if k < 0:
        s = linalg.adjoint(s)
    left = np.exp(-1j * k * x) * jt.m_value(-k, x)
    right = np.exp(1j * k * x) * jt.m_value(k, x) @ s
    return left + right


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralTransform:
    """Dense realization of F and its adjoint on the grid pair.

    kernel[i, j] holds the n x n block Psi(-k_i, x_j); wx and wk are the
    shared quadrature weights. Norms are the weighted discrete L2 norms.
    """

    xgrid: XGrid
    kgrid: object
    kernel: np.ndarray
    wx: np.ndarray
    wk: np.ndarray
    has_bound_states: bool
    isometry_residual: float
    tail_estimate: float

    @property
    def dim(self) -> int:
        return self.kernel.shape[-1]

    def apply_forward(self, values) -> np.ndarray:
        """F: position samples (nx, n) -> momentum samples (nk, n)."""
        values = np.asarray(values, dtype=np.complex128)
        z = np.conj(self.wx[:, None] * values)
        if self.dim == 1 and values.ndim == 2:
            flat = self.kernel[:, :, 0, 0] @ z[:, 0]
            return _NORM * np.conj(flat)[:, None]
        out = np.einsum("kjba,jb...->ka...", self.kernel, z)
        return _NORM * np.conj(out)

    def apply_adjoint(self, coef) -> np.ndarray:
        """F adjoint: momentum samples (nk, n) -> position samples (nx, n)."""
        coef = np.asarray(coef, dtype=np.complex128)
        weighted = self.wk[:, None] * coef
        if self.dim == 1 and coef.ndim == 2:
            flat = weighted[:, 0] @ self.kernel[:, :, 0, 0]
            return _NORM * flat[:, None]
        out = np.einsum("kjab,kb...->ja...", self.kernel, weighted)
        return _NORM * out

    def norm_x(self, values) -> float:
        values = np.asarray(values)
        return float(np.sqrt(np.sum(self.wx * np.sum(np.abs(values) ** 2, axis=tuple(range(1, values.ndim))))))

    def norm_k(self, coef) -> float:
        coef = np.asarray(coef)
        return float(np.sqrt(np.sum(self.wk * np.sum(np.abs(coef) ** 2, axis=tuple(range(1, coef.ndim))))))


def _assemble_kernel(jt: JostTable, sd: ScatteringData) -> np.ndarray:
    """Psi(-k, x) = e^{ikx} m(k, x) + e^{-ikx} m(-k, x) S(k)^* on the grids."""
    kpts = jt.k_values
    x = jt.xgrid.points
    nk, nx, n = kpts.size, x.size, jt.dim
    s_adj = linalg.adjoint(sd.s)
    eye = np.eye(n, dtype=np.complex128)
    neg_eye_blend = eye  # m defaults beyond the stored cut
    kernel = np.empty((nk, nx, n, n), dtype=np.complex128)
    nc = jt.stored_count
    for lo in range(0, nx, _CHUNK):
        hi = min(lo + _CHUNK, nx)
        phases = np.exp(1j * np.outer(kpts, x[lo:hi]))[:, :, None, None]
        if lo >= nc:
            m_pos = neg_eye_blend
            m_neg_s = s_adj[:, None, :, :]
        else:
            cut = min(hi, nc)
            m_pos = np.empty((nk, hi - lo, n, n), dtype=np.complex128)
            m_neg = np.empty_like(m_pos)
            m_pos[:, : cut - lo] = jt.m_pos[:, lo:cut]
            m_neg[:, : cut - lo] = jt.m_neg[:, lo:cut]
            m_pos[:, cut - lo :] = eye
            m_neg[:, cut - lo :] = eye
            m_neg_s = m_neg @ s_adj[:, None, :, :]
        kernel[:, lo:hi] = phases * m_pos + np.conj(phases) * m_neg_s
    return kernel


def build_transform(
    jt: JostTable,
    sd: ScatteringData,
    pair: BoundaryPair,
    v: PotentialSpec,
    kappa_max: float | None = None,
    scan_count: int = 120,
) -> SpectralTransform:
    """Assemble the dense F / F adjoint pair and probe its quality.

    Runs the bound-state scan; a detection sets has_bound_states and the
    isometry residual is refused (set to infinity), since the continuous-part
    transform alone cannot be isometric then.
    """
    if not (jt.dim == sd.dim == pair.dim == v.dim):
        raise ValueError("dimension mismatch between table, scattering data, boundary, potential.")
    if sd.kgrid != jt.kgrid:
        raise ValueError("scattering data and Jost table must share one k grid.")

    if kappa_max is None:
        peak = float(np.max(v.norms(), initial=0.0))
        kappa_max = math.sqrt(peak) + 2.0
    detections = bound_state_scan(v, pair, kappa_max, count=scan_count)
    has_bound = detections.size > 0

    kernel = _assemble_kernel(jt, sd)
    wx = integration_weights(jt.xgrid.count, jt.xgrid.step)
    wk = integration_weights(jt.kgrid.count, jt.kgrid.step)
    st = SpectralTransform(
        xgrid=jt.xgrid,
        kgrid=jt.kgrid,
        kernel=kernel,
        wx=wx,
        wk=wk,
        has_bound_states=has_bound,
        isometry_residual=0.0,
        tail_estimate=0.0,
    )

    if has_bound:
        logger.warning(
            "bound states detected (kappa = %s); transform covers the continuous part only.",
            np.array2string(detections, precision=4),
        )
        return dataclasses.replace(st, isometry_residual=math.inf, tail_estimate=math.inf)

    # probe with packets synthesized in the discrete frame, one per channel
    kpts = jt.kgrid.points
    k0 = 0.5 * (kpts[0] + kpts[-1])
    sigma = (kpts[-1] - kpts[0]) / 8.0
    worst_iso = 0.0
    worst_tail = 0.0
    tail_rows = max(1, kpts.size // 20)
    for channel in range(jt.dim):
        bump = np.zeros((kpts.size, jt.dim), dtype=np.complex128)
        bump[:, channel] = np.exp(-(((kpts - k0) / sigma) ** 2))
        packet = st.apply_adjoint(bump)
        norm_packet = st.norm_x(packet)
        if norm_packet == 0.0:
            continue
        forward = st.apply_forward(packet)
        worst_iso = max(worst_iso, abs(st.norm_k(forward) / norm_packet - 1.0))
        tail_energy = float(np.sum(wk[-tail_rows:] * np.sum(np.abs(forward[-tail_rows:]) ** 2, axis=1)))
        worst_tail = max(worst_tail, math.sqrt(tail_energy) / max(st.norm_k(forward), 1e-300))
    return dataclasses.replace(st, isometry_residual=worst_iso, tail_estimate=worst_tail)


def propagate_linear(st: SpectralTransform, psi, t: float):
    """u(t) = F* (e^{-i t k^2} F psi); exact in t given the discrete maps."""
    if st.has_bound_states:
        raise BoundStatesPresentError(
            "the spectral propagator covers only the continuous part; "
            "this problem has bound states."
        )
    values = _values_of(psi)
    coef = st.apply_forward(values)
    phase = np.exp(-1j * t * st.kgrid.points ** 2)
    coef *= phase.reshape((-1,) + (1,) * (coef.ndim - 1))
    return _rewrap(psi, st.apply_adjoint(coef))


def energy_form(pair: BoundaryPair, v: PotentialSpec, psi) -> float:
    """Quadratic form int |psi'|^2 + <V psi, psi> plus the boundary term.

    The boundary term - sum_j cot(theta_j) |psi_j(0)|^2 applies only when the
    pair came from the diagonal angle family (Dirichlet channels contribute
    nothing since psi(0) = 0 there, Neumann ones have cot = 0). For raw
    (A, B) pairs the term is omitted and flagged.
    """
    values = _values_of(psi)
    if values.ndim == 1:
        values = values[:, None]
    x = v.xgrid.points
    h = v.xgrid.step
    if values.shape[0] != x.size:
        raise ValueError(f"field has {values.shape[0]} samples but the grid has {x.size}.")
    w = integration_weights(x.size, h)

    derivative = np.gradient(values, h, axis=0)
    kinetic = float(np.sum(w * np.sum(np.abs(derivative) ** 2, axis=1)))
    vpsi = np.einsum("jab,jb->ja", v.samples, values)
    potential_term = float(np.real(np.sum(w * np.sum(np.conj(values) * vpsi, axis=1))))

    boundary_term = 0.0
    if pair.thetas is None:
        logger.warning("energy form: non-diagonal boundary pair, boundary term omitted.")
    else:
        for j, theta in enumerate(pair.thetas):
            if abs(math.sin(theta)) < 1e-12:
                continue  # Dirichlet channel: psi(0) = 0 enforced elsewhere
            cot = math.cos(theta) / math.sin(theta)
            boundary_term -= cot * float(abs(values[0, j]) ** 2)
    return kinetic + potential_term + boundary_term
