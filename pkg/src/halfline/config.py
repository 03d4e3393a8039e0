"""Run configuration for batch pipelines.

Configs are plain sectioned key=value files (INI syntax) parsed into frozen
blocks: [problem], [grids], [evolution], [verify], [output]. Every key has a
default, so a config only states what differs from it. Matrix values use
Python list syntax; imaginary entries may be written with a trailing i
(``0.5i``) or Python's j form.
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import logging
import math
import re

import numpy as np

from . import boundary, evolve, potential
from .errors import ConfigError, HermiticityError
from .potential import KGrid, XGrid

logger = logging.getLogger(__name__)

__all__ = [
    "ProblemConfig",
    "GridConfig",
    "EvolutionConfig",
    "VerifyConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "parse_config_text",
    "build_potential",
    "build_boundary",
    "build_nonlinearity",
    "build_initial",
    "line_potential_func",
    "delta_strength_matrix",
]

_POTENTIALS = ("zero", "square", "exponential", "gaussian")
_BOUNDARIES = ("dirichlet", "neumann", "robin", "angles", "delta")
_NONLINEARITIES = ("none", "scalar_power", "diagonal_power")
_INITIALS = ("bump", "packet")
_CHECKS = ("decay", "cauchy", "profile", "free_state")
_FORMATS = ("csv", "json")

# trailing-i imaginary literal: 2i, 0.5i, 1.0e-3i -> Python's j form
_IMAG_RE = re.compile(r"((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i\b")


@dataclasses.dataclass(frozen=True)
class ProblemConfig:
    """Operator, boundary condition, nonlinearity, and initial data."""

    dim: int = 1
    potential: str = "zero"
    coupling: float = 1.0
    width: float = 1.0
    rate: float = 1.0
    center: float = 0.0
    matrix: tuple | None = None
    boundary: str = "dirichlet"
    theta: float = math.pi / 4
    thetas: tuple | None = None
    delta_strength: tuple | float = 0.0
    nonlinearity: str = "none"
    alpha: float = 3.0
    lam: float = 0.0
    initial: str = "bump"
    initial_amplitude: float = 0.05
    initial_center: float = 0.0
    initial_width: float = 2.0
    initial_carrier: float = 1.0
    scan_kappa_max: float = 0.0
    scan_count: int = 200


@dataclasses.dataclass(frozen=True)
class GridConfig:
    """Uniform x and k grids: x in [0, x_max] step h, k in [k_min, k_max] step dk."""

    x_max: float = 40.0
    h: float = 0.004
    k_min: float = 1e-3
    k_max: float = 30.0
    dk: float = 0.01

    def xgrid(self) -> XGrid:
        return XGrid.from_bounds(0.0, self.x_max, self.h)

    def kgrid(self) -> KGrid:
        return KGrid.from_bounds(self.k_min, self.k_max, self.dk)


@dataclasses.dataclass(frozen=True)
class EvolutionConfig:
    """Time stepping and the earliest asymptotic measurement time a."""

    dt: float = 0.05
    t_end: float = 10.0
    sample_every: float = 1.0
    a: float = 1.0


@dataclasses.dataclass(frozen=True)
class VerifyConfig:
    """Which asymptotic checks run and over which fit windows.

    window/cauchy starts default to the evolution block's a; the window end
    defaults to t_end.
    """

    checks: tuple = _CHECKS
    window_start: float | None = None
    window_end: float | None = None
    cauchy_start: float | None = None


@dataclasses.dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple = _FORMATS


@dataclasses.dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig = ProblemConfig()
    grids: GridConfig = GridConfig()
    evolution: EvolutionConfig = EvolutionConfig()
    verify: VerifyConfig = VerifyConfig()
    output: OutputConfig = OutputConfig()

    def window(self) -> tuple:
        start = self.verify.window_start
        end = self.verify.window_end
        if start is None:
            start = self.evolution.a
        if end is None:
            end = self.evolution.t_end
        return (float(start), float(end))

    def cauchy_start(self) -> float:
        start = self.verify.cauchy_start
        if start is None:
            start = self.evolution.a
        return float(start)


def _literal(text: str):
    """Python literal with the trailing-i imaginary form mapped onto j."""
    mapped = _IMAG_RE.sub(r"\1j", text)
    try:
        return ast.literal_eval(mapped)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from None


def _tuplify(value):
    if isinstance(value, (list, tuple)):
        return tuple(_tuplify(item) for item in value)
    return value


class _Section:
    """One config section with typed, diagnosed key access."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = dict(raw)
        self.seen = set()

    def _fetch(self, key: str):
        self.seen.add(key)
        return self.raw.get(key)

    def get_float(self, key: str, default: float) -> float:
        text = self._fetch(key)
        if text is None:
            return default
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} must be a number, got {text!r}.") from None

    def get_opt_float(self, key: str):
        text = self._fetch(key)
        if text is None:
            return None
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} must be a number, got {text!r}.") from None

    def get_int(self, key: str, default: int) -> int:
        text = self._fetch(key)
        if text is None:
            return default
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} must be an integer, got {text!r}.") from None

    def get_str(self, key: str, default: str, allowed=None) -> str:
        text = self._fetch(key)
        if text is None:
            return default
        value = text.strip()
        if allowed is not None and value not in allowed:
            raise ConfigError(f"[{self.name}] {key} must be one of {', '.join(allowed)}; got {value!r}.")
        return value

    def get_literal(self, key: str, default):
        text = self._fetch(key)
        if text is None:
            return default
        return _tuplify(_literal(text))

    def get_list(self, key: str, default: tuple, allowed=None) -> tuple:
        text = self._fetch(key)
        if text is None:
            return default
        items = tuple(token.strip() for token in text.split(",") if token.strip())
        if allowed is not None:
            for item in items:
                if item not in allowed:
                    raise ConfigError(
                        f"[{self.name}] {key} entry {item!r} not among {', '.join(allowed)}."
                    )
        return items

    def reject_unknown(self) -> None:
        extra = sorted(set(self.raw) - self.seen)
        if extra:
            raise ConfigError(f"unknown key(s) in [{self.name}]: {', '.join(extra)}.")


def parse_config_text(text: str, origin: str = "<string>") -> RunConfig:
    """Parse sectioned key=value text and validate every invariant."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {origin}: {exc}") from None

    known = {"problem", "grids", "evolution", "verify", "output"}
    extra = sorted(set(parser.sections()) - known)
    if extra:
        raise ConfigError(f"unknown section(s) in {origin}: {', '.join(extra)}.")

    def section(name: str) -> _Section:
        raw = dict(parser[name]) if parser.has_section(name) else {}
        return _Section(name, raw)

    sec = section("problem")
    problem = ProblemConfig(
        dim=sec.get_int("dim", 1),
        potential=sec.get_str("potential", "zero", _POTENTIALS),
        coupling=sec.get_float("coupling", 1.0),
        width=sec.get_float("width", 1.0),
        rate=sec.get_float("rate", 1.0),
        center=sec.get_float("center", 0.0),
        matrix=sec.get_literal("matrix", None),
        boundary=sec.get_str("boundary", "dirichlet", _BOUNDARIES),
        theta=sec.get_float("theta", math.pi / 4),
        thetas=sec.get_literal("thetas", None),
        delta_strength=sec.get_literal("delta_strength", 0.0),
        nonlinearity=sec.get_str("nonlinearity", "none", _NONLINEARITIES),
        alpha=sec.get_float("alpha", 3.0),
        lam=sec.get_float("lam", 0.0),
        initial=sec.get_str("initial", "bump", _INITIALS),
        initial_amplitude=sec.get_float("initial_amplitude", 0.05),
        initial_center=sec.get_float("initial_center", 0.0),
        initial_width=sec.get_float("initial_width", 2.0),
        initial_carrier=sec.get_float("initial_carrier", 1.0),
        scan_kappa_max=sec.get_float("scan_kappa_max", 0.0),
        scan_count=sec.get_int("scan_count", 200),
    )
    sec.reject_unknown()

    sec = section("grids")
    grids = GridConfig(
        x_max=sec.get_float("x_max", 40.0),
        h=sec.get_float("h", 0.004),
        k_min=sec.get_float("k_min", 1e-3),
        k_max=sec.get_float("k_max", 30.0),
        dk=sec.get_float("dk", 0.01),
    )
    sec.reject_unknown()

    sec = section("evolution")
    evolution = EvolutionConfig(
        dt=sec.get_float("dt", 0.05),
        t_end=sec.get_float("t_end", 10.0),
        sample_every=sec.get_float("sample_every", 1.0),
        a=sec.get_float("a", 1.0),
    )
    sec.reject_unknown()

    sec = section("verify")
    verify = VerifyConfig(
        checks=sec.get_list("checks", _CHECKS, _CHECKS),
        window_start=sec.get_opt_float("window_start"),
        window_end=sec.get_opt_float("window_end"),
        cauchy_start=sec.get_opt_float("cauchy_start"),
    )
    sec.reject_unknown()

    sec = section("output")
    output = OutputConfig(
        directory=sec.get_str("directory", "out"),
        formats=sec.get_list("formats", _FORMATS, _FORMATS),
    )
    sec.reject_unknown()

    cfg = RunConfig(problem=problem, grids=grids, evolution=evolution, verify=verify, output=output)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, origin=str(path))


def _validate(cfg: RunConfig) -> None:
    p, g, e = cfg.problem, cfg.grids, cfg.evolution
    if p.dim < 1:
        raise ConfigError(f"dim must be positive, got {p.dim}.")
    if g.x_max <= 0 or g.h <= 0 or g.dk <= 0:
        raise ConfigError("x_max, h, and dk must be positive.")
    if not 0 < g.k_min < g.k_max:
        raise ConfigError(f"need 0 < k_min < k_max, got {g.k_min}, {g.k_max}.")
    # resolution guard: the k band must stay oscillation-resolved on the x grid
    guard = 2.0 * g.k_max * g.h
    if not guard < 0.5:
        raise ConfigError(f"grid guard 2*k_max*h = {guard:.3g} must stay below 0.5.")
    if not e.dt > 0:
        raise ConfigError(f"dt must be positive, got {e.dt}.")
    if not e.t_end > e.a > 0:
        raise ConfigError(f"need t_end > a > 0, got t_end={e.t_end}, a={e.a}.")
    if e.sample_every <= 0:
        raise ConfigError(f"sample_every must be positive, got {e.sample_every}.")
    if p.initial == "bump" and p.initial_center != 0.0:
        raise ConfigError("bump initial data is anchored at the origin; initial_center must stay 0.")
    if p.initial_amplitude <= 0 or p.initial_width <= 0:
        raise ConfigError("initial_amplitude and initial_width must be positive.")
    if p.alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {p.alpha}.")
    if p.matrix is not None:
        arr = np.asarray(p.matrix)
        if arr.shape != (p.dim, p.dim):
            raise ConfigError(f"matrix must be {p.dim}x{p.dim}, got shape {arr.shape}.")
    if p.boundary == "angles":
        if p.thetas is None:
            raise ConfigError("boundary=angles needs a thetas list.")
        if len(p.thetas) != p.dim:
            raise ConfigError(f"thetas must list {p.dim} angle(s), got {len(p.thetas)}.")
    if p.scan_kappa_max < 0:
        raise ConfigError(f"scan_kappa_max must be nonnegative, got {p.scan_kappa_max}.")
    if p.scan_count < 3:
        raise ConfigError(f"scan_count must be at least 3, got {p.scan_count}.")
    ws, we = cfg.window()
    if not we > ws > 0:
        raise ConfigError(f"fit window needs end > start > 0, got ({ws}, {we}).")


def _direction_matrix(p: ProblemConfig) -> np.ndarray:
    if p.matrix is None:
        return np.eye(p.dim)
    return np.asarray(p.matrix)


def build_potential(cfg: RunConfig, xgrid: XGrid | None = None) -> potential.PotentialSpec:
    """Half-line potential from the problem block on the configured x grid."""
    p = cfg.problem
    xg = xgrid if xgrid is not None else cfg.grids.xgrid()
    try:
        if p.potential == "zero":
            return potential.zero(p.dim, xg)
        mat = _direction_matrix(p)
        if p.potential == "square":
            return potential.square(p.coupling, p.width, mat, xg)
        if p.potential == "exponential":
            return potential.exponential(p.coupling, p.rate, mat, xg)
        return potential.gaussian(p.coupling, p.width, mat, xg, center=p.center)
    except HermiticityError as exc:
        raise ConfigError(f"potential matrix must be Hermitian: {exc}") from None


def build_boundary(cfg: RunConfig) -> boundary.BoundaryPair:
    """Boundary pair from the problem block; the delta form belongs to cmd_line."""
    p = cfg.problem
    if p.boundary == "dirichlet":
        return boundary.from_angles([math.pi] * p.dim)
    if p.boundary == "neumann":
        return boundary.from_angles([math.pi / 2] * p.dim)
    if p.boundary == "robin":
        return boundary.from_angles([p.theta] * p.dim)
    if p.boundary == "angles":
        return boundary.from_angles([float(t) for t in p.thetas])
    raise ConfigError("boundary=delta describes a whole-line junction; use the line command.")


def build_nonlinearity(cfg: RunConfig) -> evolve.NonlinearitySpec:
    p = cfg.problem
    if p.nonlinearity == "none":
        return evolve.scalar_power(p.alpha, 0.0)
    if p.nonlinearity == "scalar_power":
        return evolve.scalar_power(p.alpha, p.lam)
    return evolve.diagonal_power(p.alpha, p.lam)


def _smooth_step(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """C-infinity ramp: identically 0 below lo, identically 1 above hi."""
    s = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        left = np.where(s > 0, np.exp(-1.0 / np.clip(s, 1e-300, None)), 0.0)
        right = np.where(s < 1, np.exp(-1.0 / np.clip(1.0 - s, 1e-300, None)), 0.0)
    return left / (left + right)


def build_initial(cfg: RunConfig, xgrid: XGrid | None = None) -> np.ndarray:
    """Initial field (count, dim), identical in every channel.

    bump: amp * x * exp(-(x/width)^2), compliant with any boundary pair whose
    Dirichlet part annihilates it (vanishes at 0 with slope amp).
    packet: translated carrier packet times a smooth window that vanishes
    identically below x = 0.5, hence compliant with every boundary pair.
    """
    p = cfg.problem
    xg = xgrid if xgrid is not None else cfg.grids.xgrid()
    x = xg.points
    if p.initial == "bump":
        profile = p.initial_amplitude * x * np.exp(-((x / p.initial_width) ** 2))
    else:
        envelope = p.initial_amplitude * np.exp(-(((x - p.initial_center) / p.initial_width) ** 2))
        profile = envelope * np.sin(p.initial_carrier * x) * _smooth_step(x, 0.5, 2.0)
    values = np.repeat(profile[:, None], p.dim, axis=1).astype(complex)
    return values


def line_potential_func(cfg: RunConfig):
    """Whole-line coefficient Q as a callable of the signed coordinate."""
    p = cfg.problem
    mat = _direction_matrix(p)
    herm = 0.5 * (mat + np.conj(mat.T))
    if p.potential == "zero":
        return lambda x: np.zeros(np.shape(x) + herm.shape)
    if p.potential == "square":
        half = 0.5 * p.width

        def box(x):
            x = np.asarray(x, dtype=float)
            inside = (np.abs(x - p.center) <= half).astype(float)
            return p.coupling * inside[..., None, None] * herm

        return box
    if p.potential == "exponential":
        return lambda x: p.coupling * np.exp(-p.rate * np.abs(np.asarray(x, dtype=float)))[
            ..., None, None
        ] * herm
    return lambda x: p.coupling * np.exp(
        -(((np.asarray(x, dtype=float) - p.center) / p.width) ** 2)
    )[..., None, None] * herm


def delta_strength_matrix(cfg: RunConfig) -> np.ndarray:
    """Junction coupling as an n x n array, scalar strengths broadcast."""
    p = cfg.problem
    raw = p.delta_strength
    if isinstance(raw, complex):
        raise ConfigError("a scalar delta_strength must be real; matrices may carry imaginary parts.")
    if isinstance(raw, (int, float)):
        return float(raw) * np.eye(p.dim)
    arr = np.asarray(raw)
    if arr.shape != (p.dim, p.dim):
        raise ConfigError(f"delta_strength must be scalar or {p.dim}x{p.dim}, got shape {arr.shape}.")
    return arr
