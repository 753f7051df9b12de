"""Radon-Nikodym derivatives of a POVM with respect to its induced measures.

At step resolution the derivative is the cellwise operator density
R_k = M_k / tr(rho M_k), defined exactly on cells and atoms of nonzero
induced mass.  Cells the induced measure does not see stay undefined
(None): null sets carry no information under the L-infinity quotient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import opcore
from .errors import DerivativeDoesNotExist, NotPositive
from .ovm import MASS_TOL, OVM, InducedMeasure, MeasurableSet, evaluate, induced_measure


@dataclass(frozen=True, eq=False)
class StepDensity:
    """Cellwise operator density with its reference induced measure.

    ``cells[k]`` / ``atoms[k]`` is None exactly where the reference
    measure vanishes.
    """

    space: object
    dim: int
    cells: tuple
    atoms: tuple
    reference: InducedMeasure

    def defined_cells(self) -> tuple[int, ...]:
        return tuple(k for k, r in enumerate(self.cells) if r is not None)


def rn_exists(nu: OVM, rho) -> tuple[bool, tuple[tuple[str, int], ...]]:
    """Whether the derivative exists, plus the failing cells/atoms.

    A cell or atom of nonzero mass whose induced trace falls below
    RANK_TOL times its norm blocks existence.  Always true for full-rank
    states in finite dimension.
    """
    if not nu.positive:
        raise NotPositive("derivative is defined for positive OVMs")
    ind = induced_measure(nu, rho)
    failures = []
    for kind, norms, traces in (
        ("cell", nu.cell_norms(), ind.cells),
        ("atom", nu.atom_norms(), ind.atoms),
    ):
        for k, (norm, tr) in enumerate(zip(norms, traces)):
            if norm > MASS_TOL and tr <= opcore.RANK_TOL * norm:
                failures.append((kind, k))
    return not failures, tuple(failures)


def rn_derivative(nu: OVM, rho) -> StepDensity:
    """dnu/dnu_rho as a step density.

    Cellwise R_k = M_k / tr(rho M_k), which is entrywise the classical
    derivative of each entry measure; tr(rho R_k) = 1 on every defined
    cell.
    """
    ok, failures = rn_exists(nu, rho)
    if not ok:
        raise DerivativeDoesNotExist(failures)
    ind = induced_measure(nu, rho)

    def density(masses, norms, traces):
        out = []
        for mass, norm, tr in zip(masses, norms, traces):
            if tr <= MASS_TOL and norm <= MASS_TOL:
                out.append(None)
                continue
            r = mass / tr
            r.setflags(write=False)
            out.append(r)
        return tuple(out)

    return StepDensity(
        space=nu.space,
        dim=nu.dim,
        cells=density(nu.cell_masses, nu.cell_norms(), ind.cells),
        atoms=density(nu.atom_masses, nu.atom_norms(), ind.atoms),
        reference=ind,
    )


def rn_consistency(nu: OVM, rho, sets: list[MeasurableSet]) -> float:
    """Max residual of the reconstruction nu_ij(E) = sum_E R_ij * nu_rho.

    Checked entrywise over every sampled set; propagates
    DerivativeDoesNotExist.
    """
    dens = rn_derivative(nu, rho)
    ind = dens.reference
    worst = 0.0
    for e in sets:
        lhs = evaluate(nu, e)
        rhs = np.zeros_like(lhs)
        for k in np.flatnonzero(e.cells()):
            if dens.cells[k] is not None:
                rhs += dens.cells[k] * ind.cells[k]
        for k in np.flatnonzero(e.atoms()):
            if dens.atoms[k] is not None:
                rhs += dens.atoms[k] * ind.atoms[k]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def density_to_json(dens: StepDensity) -> dict:
    return {
        "cells": [None if r is None else opcore.matrix_to_json(r) for r in dens.cells],
        "atoms": [None if r is None else opcore.matrix_to_json(r) for r in dens.atoms],
    }
