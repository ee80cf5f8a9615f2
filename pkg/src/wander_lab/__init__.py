"""Numerical laboratory for grand-orbit relations in wandering domains.

Modules
-------
hypgeo       hyperbolic geometry of the disc, round annuli and cusps
innerseq     Blaschke maps, map sequences and their internal-dynamics class
linearize    non-autonomous Koenigs coordinates and the quotient surface
powertower   power-map covering towers (the indiscrete normal form)
orbitrel     grand-orbit sampling and the discreteness detector
teichreport  Teichmüller dimension from per-component verdicts
cli          scenario files, reports and the ``wander-lab`` command
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateError,
    DomainError,
    HypothesisError,
    NonConvergentError,
    OutsideCollarError,
    ScenarioError,
    WanderLabError,
)

__all__ = [
    "__version__",
    "DegenerateError",
    "DomainError",
    "HypothesisError",
    "NonConvergentError",
    "OutsideCollarError",
    "ScenarioError",
    "WanderLabError",
]
