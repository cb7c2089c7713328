"""Representations of D4: irreps, characters, types, decompositions.

A representation is stored densely as one matrix per group element in the
canonical element order.  The five irreps A1, A2, B1, B2, E carry the
standard matrices (E is the faithful 2x2 realization also used for group
arithmetic); quotient representations act by permuting cosets.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import dihedral
from .dihedral import ELEMENT_NAMES, ELEMENTS, Subgroup, element_index
from .errors import NotARepresentationError, NumericalFailureError

IRREP_NAMES = ("A1", "A2", "B1", "B2", "E")


class Representation:
    """A map from D4 elements to invertible real matrices."""

    def __init__(self, matrices: dict, name: str | None = None):
        if set(matrices) != set(ELEMENT_NAMES):
            missing = set(ELEMENT_NAMES) - set(matrices)
            raise ValueError(f"matrices missing for elements {sorted(missing)}")
        self.matrices = {k: np.asarray(v, dtype=float) for k, v in matrices.items()}
        self.dim = self.matrices["e"].shape[0]
        self.name = name
        for k, mat in self.matrices.items():
            if mat.shape != (self.dim, self.dim):
                raise ValueError(f"matrix for {k} has shape {mat.shape}")

    def __call__(self, el) -> np.ndarray:
        if isinstance(el, dihedral.DihedralElement):
            el = el.name
        return self.matrices[el]

    def character(self) -> np.ndarray:
        return np.array([np.trace(self.matrices[k]) for k in ELEMENT_NAMES])

    def __repr__(self):
        label = self.name or "?"
        return f"Representation({label!r}, dim={self.dim})"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "matrices": {k: self.matrices[k].tolist() for k in ELEMENT_NAMES},
        }

    @classmethod
    def from_json(cls, obj: dict, name: str | None = None) -> "Representation":
        return cls({k: np.array(v, float) for k, v in obj["matrices"].items()}, name)


class RepTypeVector(NamedTuple):
    """Multiplicities of (A1, A2, B1, B2, E) in a representation."""

    m_A1: int
    m_A2: int
    m_B1: int
    m_B2: int
    m_E: int

    @property
    def total_dim(self) -> int:
        return self.m_A1 + self.m_A2 + self.m_B1 + self.m_B2 + 2 * self.m_E


def _from_generators(r_mat, m_mat, name) -> Representation:
    r_mat = np.asarray(r_mat, float)
    m_mat = np.asarray(m_mat, float)
    mats = {}
    for el in ELEMENTS:
        mats[el.name] = np.linalg.matrix_power(m_mat, el.a) @ np.linalg.matrix_power(
            r_mat, el.b
        )
    return Representation(mats, name)


def irrep_catalog() -> list[Representation]:
    """The five irreps of D4 with their standard matrices."""
    return [
        _from_generators([[1]], [[1]], "A1"),
        _from_generators([[1]], [[-1]], "A2"),
        _from_generators([[-1]], [[1]], "B1"),
        _from_generators([[-1]], [[-1]], "B2"),
        _from_generators(dihedral.ROT_MAT, dihedral.MIR_MAT, "E"),
    ]


def irrep(name: str) -> Representation:
    for rep in irrep_catalog():
        if rep.name == name:
            return rep
    raise KeyError(f"unknown irrep {name!r}")


def character(rep: Representation) -> np.ndarray:
    return rep.character()


def char_inner(chi1, chi2) -> float:
    """(1/|D4|) sum_h chi1(h) chi2(h)."""
    chi1 = np.asarray(chi1, float)
    chi2 = np.asarray(chi2, float)
    return float(chi1 @ chi2) / 8.0


#: tolerance for multiplicities to count as integers
_MULT_TOL = 1e-6


def decompose_type(rep: Representation) -> RepTypeVector:
    """Type of a representation via character inner products."""
    chi = rep.character()
    mults = []
    for phi in irrep_catalog():
        m = char_inner(chi, phi.character())
        m_int = round(m)
        if abs(m - m_int) > _MULT_TOL or m_int < 0:
            raise NotARepresentationError(
                f"multiplicity of {phi.name} is {m}, not a non-negative integer"
            )
        mults.append(m_int)
    return RepTypeVector(*mults)


def direct_sum(reps: list[Representation]) -> Representation:
    if not reps:
        raise ValueError("direct_sum of an empty list")
    mats = {
        k: scipy.linalg.block_diag(*[r.matrices[k] for r in reps])
        for k in ELEMENT_NAMES
    }
    name = "+".join(r.name or "?" for r in reps)
    return Representation(mats, name)


def quotient_rep(subgroup: Subgroup, name: str | None = None) -> Representation:
    """Permutation representation of D4 on the cosets of a subgroup.

    Acts by [rho(a) f](bK) = f(a^-1 bK), i.e. rho(a) sends the basis
    vector of coset C to the basis vector of coset aC.
    """
    cosets = dihedral.cosets(subgroup)
    index = {c: i for i, c in enumerate(cosets)}
    n = len(cosets)
    mats = {}
    for el in ELEMENTS:
        mat = np.zeros((n, n))
        for i, coset in enumerate(cosets):
            rep_el = next(iter(coset))
            image = frozenset(el * rep_el * k for k in subgroup.elements)
            mat[index[image], i] = 1.0
        mats[el.name] = mat
    return Representation(mats, name)


def regular_rep() -> Representation:
    """The 8-dimensional regular representation of D4."""
    trivial = Subgroup(frozenset([dihedral.IDENTITY]))
    return quotient_rep(trivial, "regular")


def is_representation(rep: Representation, tol: float = 1e-10) -> bool:
    """Check rho(e) = I and all 64 products rho(g)rho(h) = rho(gh)."""
    if not np.all(np.abs(rep.matrices["e"] - np.eye(rep.dim)) <= tol):
        return False
    for g in ELEMENTS:
        for h in ELEMENTS:
            lhs = rep(g) @ rep(h)
            rhs = rep(g * h)
            if np.max(np.abs(lhs - rhs)) > tol:
                return False
    return True


def realization_class(rep: Representation) -> str:
    """Most specific of permutation / signed-permutation / monomial /
    orthogonal / general satisfied by every matrix of the rep."""

    def nonzero_pattern_is_permutation(mat):
        nz = np.abs(mat) > 1e-12
        return np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)

    mats = list(rep.matrices.values())
    if all(nonzero_pattern_is_permutation(m) for m in mats):
        entries = np.concatenate([m[np.abs(m) > 1e-12] for m in mats])
        if np.allclose(entries, 1.0):
            return "permutation"
        if np.allclose(np.abs(entries), 1.0):
            return "signed-permutation"
        return "monomial"
    if all(np.allclose(m.T @ m, np.eye(rep.dim)) for m in mats):
        return "orthogonal"
    return "general"


class DecompositionResult(NamedTuple):
    basis: np.ndarray  # dim x dim invertible matrix A
    irrep_sequence: tuple  # ordered irrep labels, e.g. ("A1", "A1", "E")


def block_diagonal_rep(sequence) -> Representation:
    """Direct sum of named irreps, in order."""
    return direct_sum([irrep(nm) for nm in sequence])


def block_diagonalize(rep: Representation) -> DecompositionResult:
    """Find A with A^-1 rho(g) A block diagonal for all g.

    Columns of A are assembled from equivariant embeddings of each irrep
    into rho (one block of dim(phi) columns per copy), orthonormalized at
    the level of whole maps within each isotypic component.
    """
    from .intertwiners import hom_basis  # deferred: intertwiners imports reps

    if not is_representation(rep, tol=1e-8):
        raise NotARepresentationError("input fails the homomorphism check")
    rep_type = decompose_type(rep)
    columns = []
    sequence = []
    for phi, mult in zip(irrep_catalog(), rep_type):
        if mult == 0:
            continue
        basis = hom_basis(phi, rep)
        if basis.n != mult:
            raise NumericalFailureError(
                f"Hom({phi.name}, rho) has dim {basis.n}, expected {mult}"
            )
        # Symmetric orthonormalization of the map-level Gram matrix; for
        # orthogonal rho this makes the assembled columns orthonormal.
        psis = basis.basis
        gram = np.array(
            [[np.sum(a * b) / phi.dim for b in psis] for a in psis]
        )
        w, v = np.linalg.eigh(gram)
        if np.min(w) <= 0:
            raise NumericalFailureError("degenerate isotypic Gram matrix")
        mix = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
        for k in range(mult):
            psi = sum(mix[l, k] * psis[l] for l in range(basis.n))
            columns.append(psi)
            sequence.append(phi.name)
    basis_mat = np.hstack(columns)
    cond = np.linalg.cond(basis_mat)
    if cond > 1e8:
        raise NumericalFailureError(f"change-of-basis condition number {cond:.3g}")
    # verify the residual before returning
    target = block_diagonal_rep(sequence)
    inv = np.linalg.inv(basis_mat)
    for el in ELEMENTS:
        residual = np.max(np.abs(inv @ rep(el) @ basis_mat - target(el)))
        if residual > 1e-8:
            raise NumericalFailureError(
                f"block diagonalization residual {residual:.3g} at {el.name}"
            )
    return DecompositionResult(basis_mat, tuple(sequence))
