"""Compressed-sensing channel estimation for OTFS with off-grid delay and Doppler."""

from otfs_cs.grid import GridConfig, dzt, idzt, periodic_sinc
from otfs_cs.channel import (
    Path,
    PathSet,
    NoiseSpec,
    atom_matrix,
    atom_vector,
    build_ezc,
    build_ezc_integer,
    apply_channel,
    random_pathset,
    random_pilot,
)
from otfs_cs.estimators import (
    DictionaryConfig,
    StoppingRule,
    AtomCache,
    build_atom_bank,
    omp,
    ompbr,
    br_refine,
    ls_refit,
)
from otfs_cs.harness import MethodSpec, ScenarioConfig, nmse, run_trial, run_sweep

__all__ = [
    "GridConfig", "dzt", "idzt", "periodic_sinc",
    "Path", "PathSet", "NoiseSpec", "atom_matrix", "atom_vector", "build_ezc",
    "build_ezc_integer", "apply_channel", "random_pathset", "random_pilot",
    "DictionaryConfig", "StoppingRule", "AtomCache", "build_atom_bank", "omp",
    "ompbr", "br_refine", "ls_refit",
    "MethodSpec", "ScenarioConfig", "nmse", "run_trial", "run_sweep",
]
