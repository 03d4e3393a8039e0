"""Matrix potentials on the half line.

A potential is carried as Hermitian samples on a uniform x grid, truncated at
x_max (tail treated as zero). Breakpoints declare where the potential is
allowed to jump; between them it must look continuous to the jump detector.
"""

from __future__ import annotations

import csv
import dataclasses
import logging

import numpy as np

from .errors import HermiticityError

logger = logging.getLogger(__name__)

__all__ = [
    "XGrid",
    "KGrid",
    "PotentialSpec",
    "DecompositionReport",
    "zero",
    "square",
    "exponential",
    "gaussian",
    "sampled",
    "builtin",
    "weighted_l1_norm",
    "check_regular_decomposition",
    "effective_support_count",
    "save_csv",
    "load_csv",
]

_HERM_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class XGrid:
    """Uniform spatial grid start + j*step, j = 0..count-1."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}.")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}.")

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @classmethod
    def from_bounds(cls, start: float, stop: float, step: float) -> "XGrid":
        count = int(round((stop - start) / step)) + 1
        return cls(start=start, step=step, count=count)


@dataclasses.dataclass(frozen=True)
class KGrid:
    """Uniform momentum grid start + j*step, j = 0..count-1."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step}.")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}.")

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    @classmethod
    def from_bounds(cls, start: float, stop: float, step: float) -> "KGrid":
        count = int(round((stop - start) / step)) + 1
        return cls(start=start, step=step, count=count)


@dataclasses.dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Immutable sampled potential.

    samples has shape (count, dim, dim); breakpoints list the x values where
    jumps are declared; decay_delta (when set) asserts a <x>^(-2-delta) tail.
    """

    dim: int
    kind: str
    xgrid: XGrid
    samples: np.ndarray
    breakpoints: tuple[float, ...] = ()
    decay_delta: float | None = None

    @property
    def x_max(self) -> float:
        return self.xgrid.stop

    def norms(self) -> np.ndarray:
        """Spectral norm of V at every node."""
        return spectral_norms(self.samples)

    def __repr__(self):
        return (
            f"PotentialSpec(kind={self.kind!r}, dim={self.dim}, "
            f"x_max={self.x_max:g}, count={self.xgrid.count})"
        )


def spectral_norms(stack: np.ndarray) -> np.ndarray:
    values = np.linalg.svd(np.asarray(stack, dtype=np.complex128), compute_uv=False)
    return values[..., 0]


def _check_hermitian_samples(samples: np.ndarray) -> None:
    defect = float(np.max(np.abs(samples - np.conj(np.swapaxes(samples, -1, -2)))))
    scale = max(1.0, float(np.max(np.abs(samples))))
    if defect > _HERM_TOL * scale:
        raise HermiticityError(
            f"potential samples are not Hermitian: max defect {defect:.3e} "
            f"exceeds {_HERM_TOL:g} * scale."
        )


def _make(kind, xgrid, samples, breakpoints, decay_delta) -> PotentialSpec:
    samples = np.ascontiguousarray(samples, dtype=np.complex128)
    if samples.ndim != 3 or samples.shape[0] != xgrid.count or samples.shape[1] != samples.shape[2]:
        raise ValueError(f"samples shape {samples.shape} does not match grid count {xgrid.count}.")
    _check_hermitian_samples(samples)
    breakpoints = tuple(sorted(float(b) for b in breakpoints))
    if any(b < xgrid.start for b in breakpoints):
        raise ValueError("breakpoints must lie inside the grid.")
    spec = PotentialSpec(
        dim=samples.shape[1],
        kind=kind,
        xgrid=xgrid,
        samples=samples,
        breakpoints=breakpoints,
        decay_delta=None if decay_delta is None else float(decay_delta),
    )
    if spec.decay_delta is not None:
        _check_tail_bound(spec)
    return spec


def _check_tail_bound(spec: PotentialSpec) -> None:
    x = spec.xgrid.points
    tail_start = spec.breakpoints[-1] if spec.breakpoints else spec.xgrid.start
    mask = x >= tail_start - 1e-12
    if np.count_nonzero(mask) < 4:
        return
    weight = (1.0 + x[mask] ** 2) ** (0.5 * (2.0 + spec.decay_delta))
    profile = spec.norms()[mask] * weight
    half = profile.size // 2
    allowed = 2.0 * float(np.max(profile[:half])) + 1e-14
    worst = float(np.max(profile[half:]))
    if worst > allowed:
        raise ValueError(
            f"declared decay rate 2+delta={2 + spec.decay_delta:g} is violated: "
            f"<x>^(2+delta) |V| grows to {worst:.3e} in the tail (early max {np.max(profile[:half]):.3e})."
        )


def zero(dim: int, xgrid: XGrid) -> PotentialSpec:
    samples = np.zeros((xgrid.count, dim, dim), dtype=np.complex128)
    return _make("zero", xgrid, samples, (), None)


def square(coupling: float, width: float, matrix, xgrid: XGrid) -> PotentialSpec:
    """Square well/barrier coupling * indicator[0, width] * matrix.

    A node landing exactly on the edge gets the mean of the two one-sided
    limits, which keeps the trapezoid rule second order through the jump.
    """
    m0 = np.asarray(matrix, dtype=np.complex128)
    x = xgrid.points
    profile = np.where(x < width, 1.0, 0.0)
    profile[np.abs(x - width) < 1e-12 * max(1.0, width)] = 0.5
    samples = coupling * profile[:, None, None] * m0[None, :, :]
    return _make("square", xgrid, samples, (float(width),), None)


def exponential(coupling: float, rate: float, matrix, xgrid: XGrid) -> PotentialSpec:
    if rate <= 0:
        raise ValueError(f"decay rate must be positive, got {rate}.")
    m0 = np.asarray(matrix, dtype=np.complex128)
    profile = coupling * np.exp(-rate * xgrid.points)
    samples = profile[:, None, None] * m0[None, :, :]
    return _make("exponential", xgrid, samples, (), None)


def gaussian(coupling: float, width: float, matrix, xgrid: XGrid, center: float = 0.0) -> PotentialSpec:
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}.")
    m0 = np.asarray(matrix, dtype=np.complex128)
    profile = coupling * np.exp(-(((xgrid.points - center) / width) ** 2))
    samples = profile[:, None, None] * m0[None, :, :]
    return _make("gaussian", xgrid, samples, (), None)


def sampled(xgrid: XGrid, samples, breakpoints=(), decay_delta=None) -> PotentialSpec:
    return _make("sampled", xgrid, samples, breakpoints, decay_delta)


_BUILTINS = {
    "zero": zero,
    "square": square,
    "exponential": exponential,
    "gaussian": gaussian,
    "sampled": sampled,
}


def builtin(name: str, **params) -> PotentialSpec:
    """Dispatch to a named constructor; see _BUILTINS for the catalogue."""
    try:
        maker = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown potential kind {name!r}; known: {sorted(_BUILTINS)}.") from None
    return maker(**params)


def weighted_l1_norm(spec: PotentialSpec, sigma: float) -> float:
    """Trapezoid approximation of the weighted integral of (1+x)^sigma |V(x)|."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}.")
    x = spec.xgrid.points
    integrand = (1.0 + x) ** sigma * spec.norms()
    return float(np.trapezoid(integrand, dx=spec.xgrid.step))


def effective_support_count(spec: PotentialSpec, rtol: float = 1e-14) -> int:
    """Number of leading nodes that carry the potential (trailing nodes whose
    norm is below rtol * max are dropped). At least 2 so grids stay legal."""
    norms = spec.norms()
    peak = float(np.max(norms))
    if peak <= 0.0:
        return 2
    alive = np.nonzero(norms > rtol * peak)[0]
    if alive.size == 0:
        return 2
    return max(2, min(int(alive[-1]) + 2, spec.xgrid.count))


@dataclasses.dataclass(frozen=True)
class DecompositionReport:
    """Outcome of the regular-decomposition check."""

    continuous: bool
    violating_nodes: tuple[float, ...]
    tail_start: float
    tail_derivative_integral: float
    tail_bounded: bool
    passed: bool

    def summary(self) -> str:
        state = "pass" if self.passed else "fail"
        detail = ""
        if self.violating_nodes:
            nodes = ", ".join(f"{v:.4g}" for v in self.violating_nodes[:5])
            detail = f"; jumps off declared breakpoints at x = {nodes}"
        return (
            f"regular decomposition {state}: tail from x = {self.tail_start:g}, "
            f"weighted derivative integral {self.tail_derivative_integral:.4e}"
            f"{detail}"
        )


def check_regular_decomposition(spec: PotentialSpec, delta: float) -> DecompositionReport:
    """Check continuity between declared breakpoints and integrability of the
    weighted derivative past the last breakpoint.

    The jump detector compares each successive difference against its
    neighbours: on a smooth potential the differences vary slowly, while a
    jump towers over both neighbours no matter how fine the grid.
    """
    x = spec.xgrid.points
    h = spec.xgrid.step
    diffs = spectral_norms(np.diff(spec.samples, axis=0))
    scale = max(float(np.max(spec.norms())), 1e-300)

    near_breakpoint = np.zeros(diffs.size, dtype=bool)
    for b in spec.breakpoints:
        # a difference touches the breakpoint when either endpoint is within 1.5 h
        lo = np.abs(x[:-1] - b) <= 1.5 * h
        hi = np.abs(x[1:] - b) <= 1.5 * h
        near_breakpoint |= lo | hi

    violating = []
    for i in range(diffs.size):
        if near_breakpoint[i] or diffs[i] <= 1e-10 * scale:
            continue
        # look two nodes out: a mean-sampled jump spreads over two adjacent diffs
        left = diffs[i - 2] if i > 1 else 0.0
        right = diffs[i + 2] if i + 2 < diffs.size else 0.0
        if diffs[i] > 4.0 * max(left, right) + 1e-10 * scale:
            violating.append(float(x[i]))

    tail_start = spec.breakpoints[-1] if spec.breakpoints else spec.xgrid.start
    mid = 0.5 * (x[:-1] + x[1:])
    tail_mask = mid >= tail_start
    weight = (1.0 + mid[tail_mask] ** 2) ** (0.5 * (2.0 + delta))
    derivative = diffs[tail_mask] / h
    tail_integral = float(np.sum(weight * derivative) * h) if derivative.size else 0.0

    tail_bounded = True
    if np.count_nonzero(x >= tail_start) >= 4:
        node_mask = x >= tail_start
        profile = spec.norms()[node_mask] * (1.0 + x[node_mask] ** 2) ** (0.5 * (2.0 + delta))
        half = profile.size // 2
        tail_bounded = float(np.max(profile[half:])) <= 2.0 * float(np.max(profile[:half])) + 1e-14

    continuous = not violating
    passed = continuous and np.isfinite(tail_integral) and tail_bounded
    return DecompositionReport(
        continuous=continuous,
        violating_nodes=tuple(violating),
        tail_start=float(tail_start),
        tail_derivative_integral=tail_integral,
        tail_bounded=tail_bounded,
        passed=passed,
    )


def save_csv(spec: PotentialSpec, path) -> None:
    """Write x, Re(V_ij), Im(V_ij) columns in row-major ij order."""
    n = spec.dim
    header = ["x"]
    for i in range(n):
        for j in range(n):
            header += [f"reV{i + 1}{j + 1}", f"imV{i + 1}{j + 1}"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for idx, xval in enumerate(spec.xgrid.points):
            row = [f"{xval:.17g}"]
            for i in range(n):
                for j in range(n):
                    entry = spec.samples[idx, i, j]
                    row += [f"{entry.real:.17g}", f"{entry.imag:.17g}"]
            writer.writerow(row)


def load_csv(path, breakpoints=(), decay_delta=None) -> PotentialSpec:
    """Read a potential written by save_csv (or hand-built with the same layout)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 3 or (data.shape[1] - 1) % 2 != 0:
        raise ValueError(f"expected columns x, reV.., imV.. pairs; got {data.shape[1]} columns.")
    n_sq = (data.shape[1] - 1) // 2
    n = int(round(np.sqrt(n_sq)))
    if n * n != n_sq:
        raise ValueError(f"{n_sq} matrix-entry columns do not form a square matrix.")
    x = data[:, 0]
    if x.size < 2:
        raise ValueError("need at least two sample rows.")
    steps = np.diff(x)
    h = float(steps[0])
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("x column must be a uniform increasing grid.")
    grid = XGrid(start=float(x[0]), step=h, count=x.size)
    flat = data[:, 1::2] + 1j * data[:, 2::2]
    samples = flat.reshape(x.size, n, n)
    return _make("sampled", grid, samples, breakpoints, decay_delta)
