"""Batch pipelines behind one command-line entry point.

Subcommands: scatter (Jost table, S matrix, bound-state scan), evolve
(nonlinear time stepping), verify (long-time asymptotics report), line
(whole-line junction folded onto the half line), selftest (closed-form
oracle sweep). Runs are configured by sectioned key=value files and write
their artifacts into an output directory; all floats print with 17
significant digits so outputs re-ingest exactly.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import asympt, boundary, config, evolve, jost, linemap, potential, spectral
from .errors import ConfigError, HalflineError

logger = logging.getLogger(__name__)

__all__ = [
    "main",
    "cmd_scatter",
    "cmd_evolve",
    "cmd_verify",
    "cmd_line",
    "cmd_selftest",
]

_EXIT_OK = 0
_EXIT_NUMERICAL = 1
_EXIT_CONFIG = 2


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _out_dir(cfg: config.RunConfig, override: str | None) -> str:
    return _ensure_dir(override if override else cfg.output.directory)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    logger.info("wrote %s", path)


def _complex_columns(prefix: str, dim: int) -> list:
    cols = []
    for i in range(dim):
        for j in range(dim):
            cols.append(f"re_{prefix}{i + 1}{j + 1}")
            cols.append(f"im_{prefix}{i + 1}{j + 1}")
    return cols


def _scan_kappa_max(cfg: config.RunConfig, v: potential.PotentialSpec) -> float:
    stated = cfg.problem.scan_kappa_max
    if stated > 0:
        return stated
    peak = float(np.max(v.norms(), initial=0.0))
    return math.sqrt(peak) + 2.0


def cmd_scatter(cfg: config.RunConfig, out_dir: str) -> int:
    """Solve the Jost system, form S(k), classify, scan for bound states."""
    began = time.perf_counter()
    xg, kg = cfg.grids.xgrid(), cfg.grids.kgrid()
    v = config.build_potential(cfg, xg)
    pair = config.build_boundary(cfg)
    jt = jost.solve_m(v, kg)
    sd = jost.scattering_matrix(jt, pair)
    detections = jost.bound_state_scan(v, pair, _scan_kappa_max(cfg, v), count=cfg.problem.scan_count)

    if "csv" in cfg.output.formats:
        jost.save_scattering_csv(sd, os.path.join(out_dir, "scattering.csv"))
        logger.info("wrote %s", os.path.join(out_dir, "scattering.csv"))
    if "json" in cfg.output.formats:
        report = jost.scattering_report(sd, detections)
        report["grid"] = {"x_max": cfg.grids.x_max, "h": cfg.grids.h,
                          "k_min": cfg.grids.k_min, "k_max": cfg.grids.k_max, "dk": cfg.grids.dk}
        _write_json(os.path.join(out_dir, "scattering.json"), report)

    print(f"classification: {sd.classification}")
    print(f"unitarity residual: {_fmt(sd.unitarity_residual)}")
    print(f"bound states detected: {detections.size}")
    for kappa in detections:
        print(f"  kappa = {_fmt(kappa)}  (energy {_fmt(-kappa * kappa)})")
    logger.info("scatter pipeline finished in %.1f s", time.perf_counter() - began)
    return _EXIT_OK


def _evolution_pieces(cfg: config.RunConfig):
    """Transform, nonlinearity, and initial state shared by evolve/verify."""
    xg, kg = cfg.grids.xgrid(), cfg.grids.kgrid()
    v = config.build_potential(cfg, xg)
    pair = config.build_boundary(cfg)
    jt = jost.solve_m(v, kg)
    sd = jost.scattering_matrix(jt, pair)
    st = spectral.build_transform(jt, sd, pair, v)
    nl = config.build_nonlinearity(cfg)
    u0 = evolve.make_state(0.0, config.build_initial(cfg, xg), xg, pair)
    return v, pair, jt, sd, st, nl, u0


def _run_trajectory(cfg: config.RunConfig, st, nl, u0, pair) -> evolve.Trajectory:
    e = cfg.evolution
    return evolve.evolve_nls(st, nl, u0, e.t_end, dt=e.dt, pair=pair, sample_every=e.sample_every)


def cmd_evolve(cfg: config.RunConfig, out_dir: str) -> int:
    """Run the splitting integrator and export the sampled trajectory."""
    began = time.perf_counter()
    _, pair, _, _, st, nl, u0 = _evolution_pieces(cfg)
    traj = _run_trajectory(cfg, st, nl, u0, pair)

    if "csv" in cfg.output.formats:
        evolve.save_trajectory_csv(traj, os.path.join(out_dir, "trajectory.csv"))
        logger.info("wrote %s", os.path.join(out_dir, "trajectory.csv"))
    if "json" in cfg.output.formats:
        evolve.save_summary_json(traj, os.path.join(out_dir, "summary.json"))
        logger.info("wrote %s", os.path.join(out_dir, "summary.json"))

    print(f"steps recorded: {traj.times.size}, samples kept: {len(traj.samples)}")
    print(f"final t: {_fmt(traj.final.t)}")
    print(f"final sup norm: {_fmt(traj.sup_norms[-1])}")
    print(f"final L2 norm: {_fmt(traj.l2_norms[-1])}")
    logger.info("evolve pipeline finished in %.1f s", time.perf_counter() - began)
    return _EXIT_OK


def cmd_verify(cfg: config.RunConfig, out_dir: str) -> int:
    """Evolve, then fit every requested long-time asymptotic table."""
    began = time.perf_counter()
    v, pair, jt, sd, st, nl, u0 = _evolution_pieces(cfg)
    traj = _run_trajectory(cfg, st, nl, u0, pair)

    free_st = None
    if "free_state" in cfg.verify.checks:
        v0 = potential.zero(cfg.problem.dim, cfg.grids.xgrid())
        jt0 = jost.solve_m(v0, cfg.grids.kgrid())
        sd0 = jost.scattering_matrix(jt0, pair)
        free_st = spectral.build_transform(jt0, sd0, pair, v0)

    report = asympt.build_report(
        traj, st, sd, jt, free_st=free_st,
        window=cfg.window(), start=cfg.cauchy_start(),
    )

    if "json" in cfg.output.formats:
        asympt.save_report_json(report, os.path.join(out_dir, "report.json"))
        logger.info("wrote %s", os.path.join(out_dir, "report.json"))
    if "csv" in cfg.output.formats:
        asympt.save_report_csv(report, os.path.join(out_dir, "report.csv"))
        logger.info("wrote %s", os.path.join(out_dir, "report.csv"))

    checks = cfg.verify.checks
    if "decay" in checks:
        print(f"decay exponent: {_fmt(report.decay_exponent)} "
              f"(fit half-width {_fmt(report.decay_band)})")
    if "cauchy" in checks:
        print(f"cauchy exponent: {_fmt(report.cauchy_exponent)} "
              f"(final residual {_fmt(report.cauchy_residuals[-1])})")
    if "profile" in checks:
        print(f"profile exponent: {_fmt(report.profile['exponent'])} "
              f"(final error {_fmt(report.profile['errors'][-1])})")
    if "free_state" in checks and report.free_state is not None:
        print(f"free-state exponent: {_fmt(report.free_state['exponent'])} "
              f"(final error {_fmt(report.free_state['errors'][-1])})")
    if report.flags:
        for flag in report.flags:
            print(f"flag: {flag}")
    else:
        print("flags: none")
    logger.info("verify pipeline finished in %.1f s", time.perf_counter() - began)
    return _EXIT_OK


def cmd_line(cfg: config.RunConfig, out_dir: str) -> int:
    """Fold a whole-line junction, solve it, and unfold the S entries."""
    began = time.perf_counter()
    n = cfg.problem.dim
    xg, kg = cfg.grids.xgrid(), cfg.grids.kgrid()
    lam = config.delta_strength_matrix(cfg)
    blocks = linemap.delta_boundary(n, lam)
    lp = linemap.line_problem(xg, config.line_potential_func(cfg), blocks=blocks)
    vfold, pair2n, _ = linemap.to_halfline(lp)
    jt = jost.solve_m(vfold, kg)
    sd = jost.scattering_matrix(jt, pair2n)

    k = kg.points
    # left/right transmission and reflection from the folded 2n x 2n S
    t_left = sd.s[:, :n, n:]
    r_left = sd.s[:, n:, n:]
    t_right = sd.s[:, n:, :n]
    r_right = sd.s[:, :n, :n]
    unitarity = np.abs(
        np.abs(t_left[:, 0, 0]) ** 2 + np.abs(r_left[:, 0, 0]) ** 2 - 1.0
    ) if n == 1 else np.array([
        float(np.linalg.norm(s @ np.conj(s.T) - np.eye(2 * n))) for s in sd.s
    ])

    closed_err_t = closed_err_r = None
    if n == 1 and cfg.problem.potential == "zero":
        lam_scalar = complex(lam[0, 0])
        r_ref, t_ref = linemap.delta_closed_form(lam_scalar, k)
        closed_err_t = float(np.max(np.abs(t_left[:, 0, 0] - t_ref)))
        closed_err_r = float(np.max(np.abs(r_left[:, 0, 0] - r_ref)))

    if "csv" in cfg.output.formats:
        path = os.path.join(out_dir, "line_scattering.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["k"]
            for name in ("tl", "rl", "tr", "rr"):
                header += _complex_columns(name, n)
            header.append("unitarity_defect")
            writer.writerow(header)
            for idx in range(k.size):
                row = [_fmt(k[idx])]
                for block in (t_left, r_left, t_right, r_right):
                    for i in range(n):
                        for j in range(n):
                            row += [_fmt(block[idx, i, j].real), _fmt(block[idx, i, j].imag)]
                row.append(_fmt(unitarity[idx]))
                writer.writerow(row)
        logger.info("wrote %s", path)
    if "json" in cfg.output.formats:
        payload = {
            "dim": n,
            "classification": sd.classification,
            "unitarity_residual": sd.unitarity_residual,
            "max_line_unitarity_defect": float(np.max(unitarity)),
            "delta_strength": [[repr(complex(val)) for val in row] for row in lam],
        }
        if closed_err_t is not None:
            payload["max_t_error_vs_closed_form"] = closed_err_t
            payload["max_r_error_vs_closed_form"] = closed_err_r
        _write_json(os.path.join(out_dir, "line.json"), payload)

    print(f"classification: {sd.classification}")
    print(f"max line unitarity defect: {_fmt(float(np.max(unitarity)))}")
    if closed_err_t is not None:
        print(f"max transmission error vs closed form: {_fmt(closed_err_t)}")
        print(f"max reflection error vs closed form: {_fmt(closed_err_r)}")
    logger.info("line pipeline finished in %.1f s", time.perf_counter() - began)
    return _EXIT_OK


def _selftest_checks():
    """Closed-form and invariant checks, each returning a defect to compare
    against its budget."""
    xg = potential.XGrid(0.0, 0.004, 2501)
    kg = potential.KGrid(1e-3, 0.02, 1501)
    k = kg.points

    def free_pair(thetas):
        v0 = potential.zero(len(thetas), xg)
        pair = boundary.from_angles(thetas)
        jt = jost.solve_m(v0, kg)
        return jt, jost.scattering_matrix(jt, pair)

    def check_dirichlet():
        _, sd = free_pair([math.pi])
        return float(np.max(np.abs(sd.s[:, 0, 0] + 1.0)))

    def check_neumann():
        _, sd = free_pair([math.pi / 2])
        return float(np.max(np.abs(sd.s[:, 0, 0] - 1.0)))

    def check_robin():
        theta = math.pi / 4
        _, sd = free_pair([theta])
        ref = -(math.cos(theta) - 1j * k * math.sin(theta)) / (
            math.cos(theta) + 1j * k * math.sin(theta)
        )
        return float(np.max(np.abs(sd.s[:, 0, 0] - ref)))

    def check_unitarity():
        mat = np.array([[1.0, 0.3], [0.3, 0.5]])
        v = potential.exponential(0.5, 1.0, mat, xg)
        pair = boundary.from_angles([math.pi, math.pi / 2])
        jt = jost.solve_m(v, kg)
        sd = jost.scattering_matrix(jt, pair)
        return sd.unitarity_residual

    def check_symmetry():
        # S(-k) = -J(k)J(-k)^{-1} must equal S(k) adjoint on the real axis
        mat = np.array([[1.0, 0.3], [0.3, 0.5]])
        v = potential.exponential(0.5, 1.0, mat, xg)
        pair = boundary.from_angles([math.pi, math.pi / 2])
        jt = jost.solve_m(v, kg)
        sd = jost.scattering_matrix(jt, pair)
        j_pos, j_neg = jost.jost_matrices(jt, pair)
        worst = 0.0
        for idx in (1, kg.count // 2, kg.count - 1):
            s_neg = -j_pos[idx] @ np.linalg.inv(j_neg[idx])
            worst = max(worst, float(np.max(np.abs(s_neg - np.conj(sd.s[idx].T)))))
        return worst

    def check_roundtrip():
        v = potential.gaussian(0.2, 1.0, np.array([[1.0]]), xg)
        pair = boundary.from_angles([math.pi])
        jt = jost.solve_m(v, kg)
        sd = jost.scattering_matrix(jt, pair)
        st = spectral.build_transform(jt, sd, pair, v)
        x = xg.points
        psi = (x * np.exp(-((x / 2.0) ** 2)) * np.sin(1.5 * x))[:, None].astype(complex)
        back = st.apply_adjoint(st.apply_forward(psi))
        num = st.norm_x(back - psi)
        return num / st.norm_x(psi)

    def check_sine_transform():
        # free Dirichlet kernel is the sine transform, quadrature-checked
        v0 = potential.zero(1, xg)
        pair = boundary.from_angles([math.pi])
        jt = jost.solve_m(v0, kg)
        sd = jost.scattering_matrix(jt, pair)
        st = spectral.build_transform(jt, sd, pair, v0)
        x = xg.points
        psi = (x * np.exp(-((x / 1.5) ** 2)))[:, None].astype(complex)
        coef = st.apply_forward(psi)[:, 0]
        weights = np.full(x.size, xg.step)
        weights[0] = weights[-1] = 0.5 * xg.step
        ref = np.array([
            math.sqrt(2.0 / math.pi) * 1j * np.sum(weights * np.sin(kk * x) * psi[:, 0])
            for kk in k
        ])
        scale = float(np.max(np.abs(ref)))
        return float(np.max(np.abs(np.abs(coef) - np.abs(ref)))) / scale

    def check_delta():
        report = linemap.verify_line_scattering(2.0, potential.KGrid(1e-3, 0.01, 401))
        return max(report["max_t_error"], report["max_r_error"])

    def check_delta_unitarity():
        report = linemap.verify_line_scattering(-1.5, potential.KGrid(1e-3, 0.01, 401))
        return report["max_unitarity_defect"]

    def check_boundary_residual():
        pair = boundary.from_angles([math.pi, math.pi / 2, 1.0])
        value = np.zeros((3, 1), dtype=complex)
        deriv = np.zeros((3, 1), dtype=complex)
        value[1, 0] = 1.0
        value[2, 0] = math.sin(1.0)
        deriv[0, 0] = 1.0
        deriv[2, 0] = -math.cos(1.0)
        return boundary.residual(pair, value, deriv)

    return [
        ("free dirichlet S = -I", check_dirichlet, 1e-8),
        ("free neumann S = +I", check_neumann, 1e-8),
        ("free robin closed form", check_robin, 1e-8),
        ("dressed 2x2 unitarity", check_unitarity, 1e-8),
        ("S(-k) = S(k) adjoint", check_symmetry, 1e-8),
        ("transform roundtrip", check_roundtrip, 1e-3),
        ("free kernel is sine transform", check_sine_transform, 1e-6),
        ("delta junction closed form", check_delta, 1e-8),
        ("delta junction unitarity", check_delta_unitarity, 1e-8),
        ("boundary residual identities", check_boundary_residual, 1e-12),
    ]


def cmd_selftest(out_dir: str | None = None) -> int:
    """Run every closed-form check and print one pass/fail line each."""
    began = time.perf_counter()
    results = []
    failures = 0
    for name, check, budget in _selftest_checks():
        try:
            defect = float(check())
        except Exception as exc:  # a crash counts as a failure, keep sweeping
            failures += 1
            results.append({"name": name, "error": repr(exc), "ok": False})
            print(f"FAIL {name}: {exc!r}")
            continue
        ok = defect < budget
        failures += 0 if ok else 1
        results.append({"name": name, "defect": defect, "budget": budget, "ok": ok})
        marker = "ok  " if ok else "FAIL"
        print(f"{marker} {name}  (defect {_fmt(defect)}, budget {_fmt(budget)})")
    elapsed = time.perf_counter() - began
    print(f"selftest: {len(results) - failures}/{len(results)} passed in {elapsed:.1f} s")
    if out_dir:
        _write_json(os.path.join(_ensure_dir(out_dir), "selftest.json"),
                    {"results": results, "failures": failures})
    return _EXIT_OK if failures == 0 else _EXIT_NUMERICAL


_COMMANDS = {
    "scatter": cmd_scatter,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
    "line": cmd_line,
}


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="halfline",
        description="Half-line matrix scattering, evolution, and asymptotics pipelines.",
    )
    parser.add_argument("--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("scatter", "Jost solve, S matrix, classification, bound-state scan"),
        ("evolve", "nonlinear evolution from configured initial data"),
        ("verify", "long-time decay / final-state verification report"),
        ("line", "whole-line junction folded onto the half line"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the run configuration")
        cmd.add_argument("--out", default=None, help="output directory (overrides the config)")
    st = sub.add_parser("selftest", help="closed-form oracle sweep")
    st.add_argument("--out", default=None, help="optional directory for selftest.json")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.WARNING if args.quiet else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
    try:
        if args.command == "selftest":
            return cmd_selftest(args.out)
        cfg = config.load_config(args.config)
        out_dir = _out_dir(cfg, args.out)
        return _COMMANDS[args.command](cfg, out_dir)
    except HalflineError as exc:
        print(f"error [{type(exc).__name__}] {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error [{type(exc).__name__}] {exc}", file=sys.stderr)
        return _EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
