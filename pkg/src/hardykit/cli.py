"""Command-line front end.

Subcommands
-----------
covering          validate a covering window, write its listing (CSV) and,
                  in two dimensions, an SVG with one rectangle per cuboid
verify            run the condition campaigns listed in the config and
                  write one CSV plus one structured text report each
maximal           generate atoms over the covering window and measure
                  their maximal-function norms
decompose         localize an input grid function and decompose each
                  piece into atoms
subordinate-check run the nu = 1/2 closed-form oracles for the
                  subordination machinery

Configs are sectioned key=value files; every default is echoed into
``config_echo.txt`` in the output directory so runs are reproducible.
Exit codes: 0 all asserted conditions within budget, 1 condition
failure, 2 numerical failure (a quadrature budget was exhausted).

Subordinate kernels are exposed at the substituted time: with base
kernel T and index nu, ``eval(t)`` is the fractional-power kernel at
time t^nu, the form every reported estimate consumes.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import atoms, coverings, kernels, verifier
from .domain import real_line
from .errors import DomainError, QuadratureError
from .specfun import StableDensityParams, stable_laplace_check

_DEFAULTS = {
    "kernel": {
        "kind": "bessel", "beta": "1.0", "alpha": "0.5", "nu": "0.5",
        "d": "1", "potential": "one", "box_half_width": "20.0",
        "n_points": "2000", "base": "euclidean_heat", "factors": "",
    },
    "covering": {
        "family": "bessel", "window": "-3..3", "kappa": "1.05",
        "tau": "1.0", "extent": "8.0",
    },
    "conditions": {
        "list": "A1prime,A2prime", "gamma": "0.2", "rho_target": "2.0",
        "sigma_target": "0.1", "n_max": "8",
    },
    "quadrature": {
        "tgrid_ppd": "16", "qmc_y": "8", "window_factor": "50.0",
        "box_nodes": "96", "nodes_near": "48", "nodes_cross": "20",
        "golden_iters": "15", "error_budget_rel": "0.05",
        "hard_quad_tol": "",
    },
    "maximal": {"atoms_per_cuboid": "4", "cells": "128"},
    "decompose": {"depth": "8", "cells": "1024"},
}


@dataclass
class CampaignConfig:
    raw: configparser.ConfigParser
    seed: int = 0
    threads: int = 1

    def get(self, section: str, key: str) -> str:
        return self.raw.get(section, key)

    def getfloat(self, section: str, key: str) -> float:
        return self.raw.getfloat(section, key)

    def getint(self, section: str, key: str) -> int:
        return self.raw.getint(section, key)

    def echo_lines(self) -> list[str]:
        lines = [f"seed = {self.seed}", f"threads = {self.threads}"]
        for section in self.raw.sections():
            lines.append(f"[{section}]")
            for key in sorted(self.raw[section]):
                lines.append(f"{key} = {self.raw[section][key]}")
        return lines


def load_config(path: str | None, seed: int, threads: int) -> CampaignConfig:
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULTS)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(f"config file {path!r} not found")
    return CampaignConfig(raw=parser, seed=seed, threads=threads)


def _parse_window(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("..")
    return int(lo), int(hi)


def build_covering(cfg: CampaignConfig) -> coverings.AdmissibleCovering:
    family = cfg.get("covering", "family").strip().lower()
    kappa = cfg.getfloat("covering", "kappa")
    window = cfg.get("covering", "window")
    if family == "bessel":
        return coverings.covering_bessel(_parse_window(window), kappa)
    if family == "laguerre":
        return coverings.covering_laguerre(_parse_window(window), kappa)
    if family == "uniform":
        tau = cfg.getfloat("covering", "tau")
        lo, hi = (float(v) for v in window.split(".."))
        return coverings.covering_uniform(real_line(1), tau, ([lo], [hi]), kappa)
    if family == "bessel-box":
        w = _parse_window(window)
        return coverings.box_product(coverings.covering_bessel(w, kappa),
                                     coverings.covering_bessel(w, kappa))
    if family == "laguerre-box":
        w = _parse_window(window)
        return coverings.box_product(coverings.covering_laguerre(w, kappa),
                                     coverings.covering_laguerre(w, kappa))
    if family == "bessel-laguerre-box":
        w = _parse_window(window)
        return coverings.box_product(coverings.covering_bessel(w, kappa),
                                     coverings.covering_laguerre(w, kappa))
    if family == "line-bessel":
        extent = cfg.getfloat("covering", "extent")
        return coverings.covering_line_strips(
            coverings.covering_bessel(_parse_window(window), kappa), extent)
    raise ValueError(f"unknown covering family {family!r}")


_POTENTIALS = {
    "zero": lambda x: np.zeros_like(x),
    "one": lambda x: np.ones_like(x),
    "x2": lambda x: x * x,
}


def _base_kernel(kind: str, cfg: CampaignConfig) -> kernels.KernelFamily:
    kind = kind.strip().lower()
    if kind.startswith("euclidean_heat"):
        return kernels.EuclideanHeat(cfg.getint("kernel", "d"))
    if kind.startswith("bessel"):
        _, _, arg = kind.partition(":")
        beta = float(arg) if arg else cfg.getfloat("kernel", "beta")
        return kernels.BesselKernel(beta)
    if kind.startswith("laguerre"):
        _, _, arg = kind.partition(":")
        alpha = float(arg) if arg else cfg.getfloat("kernel", "alpha")
        return kernels.LaguerreKernel(alpha)
    if kind.startswith("stable"):
        return kernels.StableKernel(cfg.getfloat("kernel", "nu"),
                                    cfg.getint("kernel", "d"))
    if kind.startswith("schrodinger"):
        pot = _POTENTIALS[cfg.get("kernel", "potential").strip().lower()]
        return kernels.schrodinger_build(
            pot, cfg.getfloat("kernel", "box_half_width"),
            cfg.getint("kernel", "n_points"))
    raise ValueError(f"unknown kernel kind {kind!r}")


def build_kernel(cfg: CampaignConfig) -> kernels.KernelFamily:
    kind = cfg.get("kernel", "kind").strip().lower()
    if kind == "subordinate":
        base = _base_kernel(cfg.get("kernel", "base"), cfg)
        return kernels.SubordinateKernel(base, cfg.getfloat("kernel", "nu"))
    if kind == "product":
        factors = [_base_kernel(f, cfg)
                   for f in cfg.get("kernel", "factors").split(",") if f.strip()]
        return kernels.ProductKernel(factors)
    return _base_kernel(kind, cfg)


def build_settings(cfg: CampaignConfig) -> verifier.VerifierSettings:
    q = cfg.raw["quadrature"]
    hard = q["hard_quad_tol"].strip()
    return verifier.VerifierSettings(
        tgrid_ppd=int(q["tgrid_ppd"]), qmc_y=int(q["qmc_y"]),
        window_factor=float(q["window_factor"]),
        box_nodes=int(q["box_nodes"]), nodes_near=int(q["nodes_near"]),
        nodes_cross=int(q["nodes_cross"]),
        golden_iters=int(q["golden_iters"]),
        error_budget_rel=float(q["error_budget_rel"]),
        hard_quad_tol=float(hard) if hard else None,
        seed=cfg.seed)


def gamma_window(k: kernels.KernelFamily) -> float:
    """Upper end of the admissible gamma interval for the family."""
    if isinstance(k, kernels.BesselKernel):
        return min(0.5, k.beta / 2.0)
    if isinstance(k, kernels.LaguerreKernel):
        return min(0.25, k.alpha / 2.0 + 0.25)
    if isinstance(k, kernels.ProductKernel):
        return min(gamma_window(f) for f in k.factors)
    return 1.0 / 3.0


def clamp_gamma(gamma: float, k: kernels.KernelFamily) -> tuple[float, bool]:
    bound = min(gamma_window(k), 1.0 / 3.0)
    if gamma >= bound:
        return 0.95 * bound, True
    return gamma, False


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _echo_config(cfg: CampaignConfig, out: Path):
    _write(out / "config_echo.txt", "\n".join(cfg.echo_lines()) + "\n")


def covering_csv(c: coverings.AdmissibleCovering) -> str:
    lines = ["index,center,half_widths,d_q"]
    for i, q in enumerate(c.cuboids):
        center = ";".join(repr(v) for v in q.center)
        half = ";".join(repr(v) for v in q.half_widths)
        lines.append(f"{i},{center},{half},{q.diameter!r}")
    return "\n".join(lines) + "\n"


def cmd_covering(cfg: CampaignConfig, out: Path) -> int:
    cov = build_covering(cfg)
    _echo_config(cfg, out)
    _write(out / "covering.csv", covering_csv(cov))
    if cov.dimension == 2:
        _write(out / "covering.svg", coverings.covering_svg(cov))
        log_ok = all(a > 0 for a, _ in cov.domain.intervals)
        if log_ok:
            _write(out / "covering_log.svg",
                   coverings.covering_svg(cov, log_axes=True))
    report = coverings.validate_covering(cov)
    text = [report.summary()]
    if report.uncovered_points:
        text.append(f"uncovered sample points: {report.uncovered_points}")
    if report.overlap_violations:
        text.append(f"overlap violations: {report.overlap_violations}")
    if report.neighbour_counterexamples:
        text.append(f"neighbour mismatches: {report.neighbour_counterexamples}")
    _write(out / "covering_report.txt", "\n".join(text) + "\n")
    print(report.summary())
    return 0 if report.passed else 1


def _run_conditions(cfg: CampaignConfig, out: Path) -> tuple[bool, list[str]]:
    k = build_kernel(cfg)
    cov = build_covering(cfg)
    settings = build_settings(cfg)
    budget = settings.error_budget_rel
    wanted = [c.strip() for c in cfg.get("conditions", "list").split(",")
              if c.strip()]
    gamma_req = cfg.getfloat("conditions", "gamma")
    gamma, clamped = clamp_gamma(gamma_req, k)
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    map_fn = pool.map if pool else map
    summaries = []
    all_ok = True

    def emit(report, ok, tag=None):
        nonlocal all_ok
        name = tag or report.condition_id
        if clamped:
            report.notes.append(
                f"gamma clamped from {gamma_req} to {gamma} (family window)")
        _write(out / f"{name}.csv", report.to_csv())
        _write(out / f"{name}.txt", report.to_text())
        status = "ok" if ok else "FAIL"
        summaries.append(f"{name}: C={report.sup_constant:.6g} "
                         f"err={report.max_error:.3g} [{status}]")
        all_ok = all_ok and ok

    try:
        for cond in wanted:
            cname = cond.strip().lower()
            if cname == "a1prime":
                rep = verifier.verify_A1prime(k, cov, settings, map_fn=map_fn)
                emit(rep, rep.finite and rep.within_error_budget(budget))
            elif cname == "a2prime":
                rep = verifier.verify_A2prime(k, cov, settings, map_fn=map_fn)
                emit(rep, rep.finite and rep.within_error_budget(budget))
            elif cname == "a1":
                for rep in verifier.verify_A1(k, cov, gamma,
                                              settings=settings, map_fn=map_fn):
                    emit(rep, rep.finite and rep.within_error_budget(budget),
                         tag=f"A1_delta{rep.parameters['delta']:.3f}")
            elif cname == "a2":
                for rep in verifier.verify_A2(k, cov, gamma,
                                              settings=settings, map_fn=map_fn):
                    emit(rep, rep.finite and rep.within_error_budget(budget),
                         tag=f"A2_delta{rep.parameters['delta']:.3f}")
            elif cname == "a0prime":
                rep = verifier.verify_A0prime(k)
                emit(rep, rep.finite)
            elif cname == "a0gauss":
                rep = verifier.fit_gaussian_envelope(k)
                emit(rep, rep.finite)
            elif cname == "dprime":
                rep = verifier.verify_schrodinger_D(
                    k, cov, cfg.getfloat("conditions", "rho_target"),
                    cfg.getint("conditions", "n_max"), settings)
                emit(rep, bool(rep.parameters["passed"]))
            elif cname == "k":
                rep = verifier.verify_schrodinger_K(
                    k, cov, cfg.getfloat("conditions", "sigma_target"), settings)
                emit(rep, bool(rep.parameters["passed"]))
            elif cname == "a3a4":
                part = coverings.partition_of_unity(cov)
                rep3, rep4 = verifier.verify_a3_a4(k, cov, part, settings)
                emit(rep3, rep3.finite)
                emit(rep4, rep4.finite)
            elif cname == "smalltime":
                lo = cov.window_box[0][0]
                hi = cov.window_box[1][0]
                xs = [lo + 0.3 * (hi - lo), lo + 0.7 * (hi - lo)]
                rep = verifier.verify_smalltime_limits(k, xs, [0.1, 0.5])
                emit(rep, bool(rep.parameters["passed"]))
            elif cname == "laguerre_envelope":
                rep = verifier.verify_laguerre_envelope(k)
                ok = rep.finite and \
                    rep.per_cuboid[0].metadata["max_violation_ratio"] <= 1.0 + 1e-9
                emit(rep, ok)
            else:
                raise ValueError(f"unknown condition {cond!r}")
    finally:
        if pool:
            pool.shutdown()
    return all_ok, summaries


def cmd_verify(cfg: CampaignConfig, out: Path) -> int:
    _echo_config(cfg, out)
    ok, summaries = _run_conditions(cfg, out)
    _write(out / "verify_summary.txt", "\n".join(summaries) + "\n")
    for line in summaries:
        print(line)
    return 0 if ok else 1


def cmd_maximal(cfg: CampaignConfig, out: Path) -> int:
    k = build_kernel(cfg)
    cov = build_covering(cfg)
    settings = build_settings(cfg)
    per = cfg.getint("maximal", "atoms_per_cuboid")
    cells = cfg.getint("maximal", "cells")
    _echo_config(cfg, out)
    rows = ["atom_index,cuboid_index,kind,value,error,atom_l1"]
    worst = 0.0
    idx = 0
    for ci, q in enumerate(cov.cuboids):
        for j in range(per):
            if j % 2 == 0:
                atom = atoms.make_local_atom(q, cells)
            else:
                atom = atoms.random_classical_atom(
                    q, cov.kappa, seed=cfg.seed * 7919 + ci * 131 + j,
                    cells=cells)
            value, err, _ = verifier.maximal_norm(k, atom, settings)
            rows.append(f"{idx},{ci},{atom.kind},{value!r},{err!r},"
                        f"{atom.l1_norm!r}")
            worst = max(worst, value)
            idx += 1
    _write(out / "maximal.csv", "\n".join(rows) + "\n")
    _write(out / "maximal.txt",
           f"atoms = {idx}\nmax_maximal_norm = {worst!r}\n"
           f"kernel = {k.describe()}\ncovering = {verifier.covering_id(cov)}\n")
    print(f"max over {idx} atoms of the maximal-function norm: {worst:.6g}")
    return 0


def cmd_decompose(cfg: CampaignConfig, out: Path, input_path: str) -> int:
    cov = build_covering(cfg)
    depth = cfg.getint("decompose", "depth")
    cells = cfg.getint("decompose", "cells")
    _echo_config(cfg, out)
    f = atoms.load_grid_function(input_path)
    win_lo = cov.window_box[0][0]
    win_hi = cov.window_box[1][0]
    support = f.centers[np.abs(f.values) > 0]
    if support.size and (support.min() < win_lo or support.max() > win_hi):
        print(f"window error: input support [{support.min():g}, "
              f"{support.max():g}] escapes the covering window "
              f"[{win_lo:g}, {win_hi:g}]", file=sys.stderr)
        return 1
    partition = coverings.partition_of_unity(cov)
    pieces = atoms.localize(f, partition, cells)
    total_l1 = 0.0
    residual = 0.0
    recon_err = 0.0
    lines = []
    for q, fq in pieces:
        dec = atoms.local_decompose(fq, q, cov.kappa, depth)
        total_l1 += dec.coefficient_l1
        residual += dec.residual_norm
        rec = dec.reconstruct()
        recon_err += atoms.GridFunction(
            fq.lo, fq.hi, rec.values - fq.values).l1_norm
        for coeff, atom in dec.terms:
            lines.extend(atoms.atom_to_lines(atom, coeff))
        rem = dec.remainder
        lines.append(f"remainder lo={rem.lo!r} hi={rem.hi!r} cells={rem.cells}")
        lines.append(",".join(repr(float(v)) for v in rem.values))
        lines.append("end")
    probes = np.linspace(win_lo, win_hi, 2049)[1:-1]
    identity_err = atoms.localize_reconstruction_error(f, partition, probes)
    _write(out / "decomposition.txt", "\n".join(lines) + "\n")
    _write(out / "decompose_summary.txt",
           f"coefficient_l1 = {total_l1!r}\n"
           f"residual_l1 = {residual!r}\n"
           f"reconstruction_l1_error = {recon_err!r}\n"
           f"partition_identity_error = {identity_err!r}\n"
           f"depth = {depth}\npieces = {len(pieces)}\n")
    print(f"sum|lambda| = {total_l1:.6g}, residual = {residual:.3g}, "
          f"reconstruction error = {recon_err:.3g}")
    return 0


def cmd_subordinate_check(cfg: CampaignConfig, out: Path) -> int:
    """nu = 1/2 closed-form oracles for the subordination machinery."""
    _echo_config(cfg, out)
    sub = kernels.SubordinateKernel(kernels.EuclideanHeat(1), 0.5)
    ts = np.geomspace(0.05, 5.0, 12)
    rs = np.linspace(0.0, 12.0, 9)
    worst_kernel = 0.0
    for t in ts:
        mine = sub.eval(t * t, rs, 0.0)
        ref = kernels.poisson_kernel(t, rs, 0.0)
        worst_kernel = max(worst_kernel, float(np.max(np.abs(mine - ref) / ref)))
    params = StableDensityParams(0.5)
    worst_laplace = 0.0
    for x in (0.0, 0.5, 2.0, 4.0, 25.0, 100.0):
        got = stable_laplace_check(params, x)
        worst_laplace = max(worst_laplace, abs(got - math.exp(-math.sqrt(x))))
    ok = worst_kernel <= 1e-5 and worst_laplace <= 1e-4
    text = (f"poisson_kernel_max_rel_err = {worst_kernel!r}\n"
            f"laplace_identity_max_abs_err = {worst_laplace!r}\n"
            f"status = {'ok' if ok else 'FAIL'}\n")
    _write(out / "subordinate_check.txt", text)
    print(text, end="")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hardykit",
        description="semigroup kernels, coverings, atoms, and condition campaigns")
    parser.add_argument("--config", default=None, help="sectioned key=value file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("covering")
    sub.add_parser("verify")
    sub.add_parser("maximal")
    dec = sub.add_parser("decompose")
    dec.add_argument("input", help="grid function file")
    sub.add_parser("subordinate-check")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.threads)
        out = Path(args.out)
        if args.command == "covering":
            return cmd_covering(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "maximal":
            return cmd_maximal(cfg, out)
        if args.command == "decompose":
            return cmd_decompose(cfg, out, args.input)
        if args.command == "subordinate-check":
            return cmd_subordinate_check(cfg, out)
        raise ValueError(f"unknown command {args.command}")
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
