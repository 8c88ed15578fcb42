"""Command-line front end.

Commands: solve, convergence, mesh-info, verify-case.
Exit codes: 0 ok, 1 numeric failure, 2 input error.

Options can come from a flat key=value config file (--config); explicit
flags override file entries.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import verification
from .assembly import AssemblyError
from .mesh import MeshError, load_mesh, validate
from .solver import SolverError
from .study import (MESH_FAMILIES, StudyConfig, csv_lines, make_mesh,
                    markdown_table, run_study)


class InputError(Exception):
    pass


def _read_config(path) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{ln}: expected key=value")
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}")
    return out


def _parse_levels(text) -> tuple:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise InputError(f"bad levels {text!r}; expected comma-separated integers")


def _study_config(args) -> StudyConfig:
    cfg = {}
    if args.config:
        cfg = _read_config(args.config)
    pick = lambda flag, key, default: flag if flag is not None else cfg.get(key, default)
    levels = _parse_levels(pick(args.levels, "levels", "2,4,8"))
    try:
        config = StudyConfig(
            case=pick(args.case, "case", "trig-cube"),
            mesh=pick(args.mesh, "mesh", "tet"),
            levels=levels,
            degree=int(pick(args.degree, "degree", 1)),
            solver_tol=float(pick(args.solver_tol, "solver_tol", 1e-10)),
            threads=int(pick(args.threads, "threads", 1)),
            out=pick(args.out, "out", "."),
            instance=pick(args.instance, "instance", "model"),
        ).validated()
    except ValueError as exc:
        raise InputError(str(exc))
    return config


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def cmd_solve(args) -> int:
    config = _study_config(args)
    rows = run_study(StudyConfig(**{**config.__dict__,
                                    "levels": config.levels[:1]}))
    row = rows[0]
    base = os.path.join(config.out, f"solve_{config.case}_{config.mesh}")
    _write(base + ".csv", "\n".join(csv_lines(rows)) + "\n")
    rep = row.report
    print(f"case={config.case} mesh={config.mesh} level={row.level} "
          f"k={config.degree}")
    print(f"h={rep.h:.4e} ndof={rep.n_dofs} residual={row.residual:.3e}")
    print(f"err_bar1={rep.err_divcurl:.6e} err_bar={rep.err_energy:.6e} "
          f"err_wh={rep.err_pressure:.6e}")
    print(f"err_l2={rep.err_l2:.6e} err_eh={rep.err_face:.6e} "
          f"err_1h={rep.err_jump:.6e}")
    print(f"wrote {base}.csv")
    return 0


def cmd_convergence(args) -> int:
    config = _study_config(args)
    if len(config.levels) < 3:
        raise InputError("need >=3 refinement levels for a convergence study")
    rows = run_study(config)
    base = os.path.join(config.out, f"convergence_{config.case}_{config.mesh}")
    _write(base + ".csv", "\n".join(csv_lines(rows)) + "\n")
    table = markdown_table(
        rows, f"{config.case} on {config.mesh} meshes, k={config.degree}")
    _write(base + ".md", table)
    print(table)
    print(f"wrote {base}.csv and {base}.md")
    return 0


def cmd_mesh_info(args) -> int:
    target = args.mesh_target
    if ":" in target and target.split(":", 1)[0] in MESH_FAMILIES:
        family, n = target.split(":", 1)
        try:
            mesh = make_mesh(family, int(n))
        except ValueError as exc:
            raise InputError(str(exc))
    else:
        mesh = load_mesh(target)
    report = validate(mesh)
    print(f"cells={mesh.n_cells} faces={mesh.n_faces} "
          f"boundary_components={mesh.n_components} h={mesh.h!r}")
    for key, val in report.metrics.items():
        print(f"{key} = {val}")
    if report.violations:
        print("violations:")
        for v in report.violations:
            print(f"  {v}")
        return 1
    print("validation: ok")
    return 0


def cmd_verify_case(args) -> int:
    config = _study_config(args)
    case = verification.catalog(config.case, config.degree)
    fd = verification.fd_check(case)
    print(f"case={config.case} (k={config.degree}) finite-difference oracle:")
    failed = False
    for name, err in fd.items():
        status = "ok" if err <= 1e-6 else "FAIL"
        failed |= status == "FAIL"
        print(f"  {name}: max rel mismatch {err:.3e} [{status}]")
    mesh = make_mesh(config.mesh if config.mesh in MESH_FAMILIES else "tet",
                     config.levels[0])
    for kind in ("div-curl", "model"):
        rep = verification.check_compatibility(case, kind, mesh)
        tag = "ok" if rep.ok else "VIOLATION"
        print(f"  compatibility[{kind}]: {tag}")
        for v in rep.violations:
            print(f"    {v}")
        failed |= not rep.ok
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wgdivcurl",
        description="Weak Galerkin div-curl solver and convergence studies")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--case", choices=verification.CASE_NAMES)
        p.add_argument("--mesh", help="mesh family (tet|hex|hollow) or file path")
        p.add_argument("--levels", help="comma-separated refinement levels")
        p.add_argument("--degree", type=int)
        p.add_argument("--out")
        p.add_argument("--solver-tol", dest="solver_tol", type=float)
        p.add_argument("--threads", type=int)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--instance",
                       choices=("model", "tangential", "normal-saddle"))

    p_solve = sub.add_parser("solve", help="single solve with error report")
    add_common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_conv = sub.add_parser("convergence", help="refinement study with rates")
    add_common(p_conv)
    p_conv.set_defaults(fn=cmd_convergence)

    p_info = sub.add_parser("mesh-info", help="validate and describe a mesh")
    p_info.add_argument("mesh_target", help="mesh file path or family:n")
    p_info.set_defaults(fn=cmd_mesh_info)

    p_ver = sub.add_parser("verify-case",
                           help="finite-difference and compatibility checks")
    add_common(p_ver)
    p_ver.set_defaults(fn=cmd_verify_case)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, MeshError, AssemblyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
