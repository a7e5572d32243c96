"""Python access to the magceptor core.

Topologies load from the same JSON files the command line uses. Results come
back as dicts and lists.
"""

from ._core import (
    DomainError,
    ParseError,
    SingularityError,
    Topology,
    clopper_pearson_upper,
    compactness,
    control_entropy,
    crank_angles,
    design,
    dipole_field,
    evaluate_unit,
    pair_energy,
    pair_force,
    run_program,
    selectivity,
    truth_table,
)

__all__ = [
    "DomainError",
    "ParseError",
    "SingularityError",
    "Topology",
    "clopper_pearson_upper",
    "compactness",
    "control_entropy",
    "crank_angles",
    "design",
    "dipole_field",
    "evaluate_unit",
    "pair_energy",
    "pair_force",
    "run_program",
    "selectivity",
    "truth_table",
]
