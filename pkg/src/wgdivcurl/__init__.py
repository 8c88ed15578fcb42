"""Weak Galerkin finite elements for div-curl saddle-point systems."""

from .mesh import (
    PolyMesh,
    MeshError,
    build_cube_tet_mesh,
    build_cube_hex_mesh,
    load_mesh,
    save_mesh,
    validate,
    frame_from_normal,
)
from .space import WGSpace, WeakFunction, PressureFunction
from .assembly import assemble, apply_a, apply_b, stabilizer, SaddleSystem
from .solver import solve, Solution, SolverError

__all__ = [
    "PolyMesh", "MeshError", "build_cube_tet_mesh", "build_cube_hex_mesh",
    "load_mesh", "save_mesh", "validate", "frame_from_normal",
    "WGSpace", "WeakFunction", "PressureFunction",
    "assemble", "apply_a", "apply_b", "stabilizer", "SaddleSystem",
    "solve", "Solution", "SolverError",
]
