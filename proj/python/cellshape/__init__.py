"""Gradient-penalized shape optimization of elastic composites."""

from ._cellshape import (
    Config,
    ConfigError,
    Mesh,
    MeshError,
    RunResult,
    SolverError,
    StepRecord,
    generate_mesh,
    gradient_check,
    load_config,
    load_mesh,
    run_optimization,
    save_mesh,
    save_vtk,
)

__all__ = [
    "Config",
    "ConfigError",
    "Mesh",
    "MeshError",
    "RunResult",
    "SolverError",
    "StepRecord",
    "generate_mesh",
    "gradient_check",
    "load_config",
    "load_mesh",
    "run_optimization",
    "save_mesh",
    "save_vtk",
]
