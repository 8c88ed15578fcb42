"""Study engine shared by the CLI: single solves and convergence sweeps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import verification
from .analysis import ErrorReport, convergence_rate, error_report
from .mesh import PolyMesh, build_cube_hex_mesh, build_cube_tet_mesh, load_mesh

MESH_FAMILIES = ("tet", "hex", "hollow")
RATE_COLUMNS = ("err_bar1", "err_bar", "err_wh", "err_l2", "err_eh")
CSV_HEADER = "h,ndof,err_bar1,err_bar,err_wh,err_l2,err_eh,residual"


def make_mesh(family: str, n: int) -> PolyMesh:
    """Structured mesh of a family at refinement level n."""
    if family == "tet":
        return build_cube_tet_mesh(n)
    if family == "hex":
        return build_cube_hex_mesh(n)
    if family == "hollow":
        # fixed cavity [1/3,2/3]^3 across refinements
        if n % 3 != 0:
            raise ValueError("hollow family needs a level divisible by 3")
        return build_cube_hex_mesh(n, cavity=((n // 3,) * 3, (2 * n // 3,) * 3))
    raise ValueError(f"unknown mesh family {family!r}")


@dataclass
class StudyConfig:
    case: str = "trig-cube"
    mesh: str = "tet"               # family name or a mesh file path
    levels: tuple = (2, 4, 8)
    degree: int = 1
    solver_tol: float = 1e-10
    threads: int = 1
    out: str = "."
    instance: str = "model"         # model | tangential | normal-saddle

    def validated(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("refinement levels must be strictly increasing")
        if self.case not in verification.CASE_NAMES:
            raise ValueError(f"unknown case {self.case!r}")
        if self.instance not in ("model", "tangential", "normal-saddle"):
            raise ValueError(f"unknown instance kind {self.instance!r}")
        return self


@dataclass
class StudyRow:
    level: int
    report: ErrorReport
    residual: float


def _mesh_for(config: StudyConfig, level: int) -> PolyMesh:
    if config.mesh in MESH_FAMILIES:
        return make_mesh(config.mesh, level)
    return load_mesh(config.mesh)


def run_level(config: StudyConfig, level: int) -> StudyRow:
    """Solve the configured instance on one mesh level and measure errors."""
    case = verification.catalog(config.case, config.degree)
    mesh = _mesh_for(config, level)
    if config.instance == "model":
        inst = verification.model_instance(case, mesh, config.degree)
    elif config.instance == "tangential":
        inst = verification.tangential_instance(case, mesh, config.degree)
    else:
        inst = verification.normal_saddle_instance(case, mesh, config.degree)
    space, sol = verification.solve_instance(inst, tol=config.solver_tol)
    if inst.exact_u is not None:
        report = error_report(space, sol, inst.exact_u, inst.exact_p)
    else:
        report = ErrorReport(h=mesh.h, n_dofs=sol.n_unknowns,
                             err_divcurl=float("nan"), err_energy=float("nan"),
                             err_pressure=float("nan"), err_l2=float("nan"),
                             err_face=float("nan"), err_jump=float("nan"))
    return StudyRow(level=level, report=report, residual=sol.residual)


def run_study(config: StudyConfig) -> list:
    config.validated()
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda n: run_level(config, n), config.levels))
    return [run_level(config, n) for n in config.levels]


# ---------------------------------------------------------------------------
# reports

def csv_lines(rows) -> list:
    out = [CSV_HEADER]
    for r in rows:
        rep = r.report
        out.append(f"{rep.h!r},{rep.n_dofs},{rep.err_divcurl!r},"
                   f"{rep.err_energy!r},{rep.err_pressure!r},{rep.err_l2!r},"
                   f"{rep.err_face!r},{r.residual!r}")
    return out


_COL_GETTERS = {
    "err_bar1": lambda rep: rep.err_divcurl,
    "err_bar": lambda rep: rep.err_energy,
    "err_wh": lambda rep: rep.err_pressure,
    "err_l2": lambda rep: rep.err_l2,
    "err_eh": lambda rep: rep.err_face,
}

ERROR_FLOOR = 1e-12    # below this, rates are reported as "exact"


def observed_rates(rows, column: str):
    """(all-level slope, last-two slope) for one error column; either may be
    the string 'exact' when the errors sit at the round-off floor."""
    vals = [(r.report.h, _COL_GETTERS[column](r.report)) for r in rows]
    if any(v <= ERROR_FLOOR for _, v in vals):
        return "exact", "exact"
    return (convergence_rate(vals), convergence_rate(vals[-2:]))


def markdown_table(rows, title: str) -> str:
    lines = [f"## {title}", ""]
    header = ["level", "h", "ndof"]
    for col in RATE_COLUMNS:
        header += [col, "rate"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for i, r in enumerate(rows):
        cells = [str(r.level), f"{r.report.h:.4e}", str(r.report.n_dofs)]
        for col in RATE_COLUMNS:
            v = _COL_GETTERS[col](r.report)
            cells.append(f"{v:.4e}")
            if i == 0:
                cells.append("-")
            else:
                prev = rows[i - 1].report
                pv = _COL_GETTERS[col](prev)
                if v <= ERROR_FLOOR or pv <= ERROR_FLOOR:
                    cells.append("exact")
                else:
                    rate = np.log(pv / v) / np.log(prev.h / r.report.h)
                    cells.append(f"{rate:.2f}")
        lines.append("| " + " | ".join(cells) + " |")
    if len(rows) >= 2:
        summary = []
        for col in RATE_COLUMNS:
            all_r, last_r = observed_rates(rows, col)
            fmt = lambda x: x if isinstance(x, str) else f"{x:.2f}"
            summary.append(f"{col}: all {fmt(all_r)}, last {fmt(last_r)}")
        lines += ["", "Observed rates (least-squares over all levels / last two):",
                  "", *[f"- {s}" for s in summary]]
    lines.append("")
    return "\n".join(lines)
