"""Capsule catalogue, admissible nonlinearities, and fiber construction.

A capsule is a named representation together with the nonlinearities that
commute with it.  Fibers are ordered stacks of capsules; the channel
layout puts copies of each capsule contiguously, in listed order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import dihedral, reps
from .dihedral import Subgroup, element
from .errors import AdmissibilityError, TypeSystemError
from .reps import Representation

#: subgroup generators of the quotient capsules, named by their generators
_QUOTIENT_SUBGROUPS = {
    "regular": ("e",),
    "qm": ("m",),
    "qmr": ("mr",),
    "qmr2": ("mr2",),
    "qmr3": ("mr3",),
    "r2": ("r2",),
    "r": ("r",),
    "r2m": ("r2", "m"),
    "r2mr": ("r2", "mr"),
}

NONLINEARITY_TAGS = ("identity", "relu", "crelu", "norm-relu")


@dataclass(frozen=True)
class Capsule:
    id: str
    rep: Representation
    realization: str
    admissible: frozenset

    @property
    def dim(self) -> int:
        return self.rep.dim


def _subgroup_from_generators(names) -> Subgroup:
    els = {dihedral.IDENTITY}
    frontier = [element(nm) for nm in names]
    els.update(frontier)
    changed = True
    while changed:
        changed = False
        for g in list(els):
            for h in list(els):
                gh = g * h
                if gh not in els:
                    els.add(gh)
                    changed = True
    return Subgroup(frozenset(els))


def _admissible_for(realization: str) -> frozenset:
    # permutation reps commute with anything elementwise; signed
    # permutations need sign-covariant nonlinearities like CReLU; all
    # catalogued reps are orthogonal, so norm-acting ones always work.
    if realization == "permutation":
        return frozenset({"identity", "relu", "crelu", "norm-relu"})
    if realization == "signed-permutation":
        return frozenset({"identity", "crelu", "norm-relu"})
    if realization == "orthogonal":
        return frozenset({"identity", "norm-relu"})
    return frozenset({"identity"})


def _make_capsule(name: str, rep: Representation) -> Capsule:
    realization = reps.realization_class(rep)
    return Capsule(name, rep, realization, _admissible_for(realization))


@lru_cache(maxsize=1)
def _catalog() -> dict:
    out = {}
    for rep in reps.irrep_catalog():
        out[rep.name] = _make_capsule(rep.name, rep)
    for name, gens in _QUOTIENT_SUBGROUPS.items():
        rep = reps.quotient_rep(_subgroup_from_generators(gens), name)
        out[name] = _make_capsule(name, rep)
    return out


def capsule_catalog() -> list[Capsule]:
    """All 14 built-in capsules: 5 irreducible + 9 quotient."""
    return list(_catalog().values())


def get_capsule(capsule_id: str) -> Capsule:
    """Resolve a capsule id, including post-activation ids like "crelu(E)"."""
    cat = _catalog()
    if capsule_id in cat:
        return cat[capsule_id]
    if capsule_id.endswith(")") and "(" in capsule_id:
        tag, inner = capsule_id[:-1].split("(", 1)
        return act_capsule(get_capsule(inner), tag)
    raise KeyError(f"unknown capsule {capsule_id!r}")


def act_rep(capsule: Capsule, tag: str) -> Representation:
    """The representation carried by the capsule's output after a
    nonlinearity, i.e. rho' with nu(rho(h) v) = rho'(h) nu(v)."""
    if tag not in capsule.admissible:
        raise AdmissibilityError(
            f"nonlinearity {tag!r} is not admissible for capsule {capsule.id!r} "
            f"(realization {capsule.realization})"
        )
    if tag != "crelu":
        return capsule.rep
    # CReLU doubles the dimension: positive parts first, then negative.
    # An entry +1 at (i,j) sends j+ -> i+ and j- -> i-; -1 swaps them.
    mats = {}
    for k, mat in capsule.rep.matrices.items():
        pos = np.maximum(mat, 0.0)
        neg = np.maximum(-mat, 0.0)
        mats[k] = np.block([[pos, neg], [neg, pos]])
    return Representation(mats, f"crelu({capsule.rep.name or '?'})")


def act_capsule(capsule: Capsule, tag: str) -> Capsule:
    """Post-activation capsule (identity-like tags keep the capsule)."""
    if tag not in capsule.admissible:
        raise AdmissibilityError(
            f"nonlinearity {tag!r} is not admissible for capsule {capsule.id!r}"
        )
    if tag != "crelu":
        return capsule
    return _make_capsule(f"crelu({capsule.id})", act_rep(capsule, tag))


class FiberSpec:
    """Ordered stack of (capsule id, multiplicity) pairs."""

    def __init__(self, entries):
        self.entries = []
        for capsule_id, mult in entries:
            if mult < 0:
                raise ValueError(f"negative multiplicity for {capsule_id!r}")
            get_capsule(capsule_id)  # raises on unknown id
            self.entries.append((capsule_id, int(mult)))
        self.entries = tuple(self.entries)

    @property
    def channels(self) -> int:
        return sum(get_capsule(cid).dim * m for cid, m in self.entries)

    def capsule_blocks(self):
        """Yield (capsule, copy index, channel offset) per capsule copy."""
        offset = 0
        for cid, mult in self.entries:
            cap = get_capsule(cid)
            for copy in range(mult):
                yield cap, copy, offset
                offset += cap.dim

    def __eq__(self, other):
        return isinstance(other, FiberSpec) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        inner = ", ".join(f"{cid}x{m}" for cid, m in self.entries)
        return f"FiberSpec[{inner}]"

    def to_json(self):
        return [{"capsule": cid, "mult": m} for cid, m in self.entries]

    @classmethod
    def from_json(cls, obj) -> "FiberSpec":
        return cls([(entry["capsule"], entry["mult"]) for entry in obj])


def fiber_rep(spec: FiberSpec) -> Representation:
    """Block-diagonal representation of a capsule stack."""
    parts = []
    for cid, mult in spec.entries:
        parts.extend([get_capsule(cid).rep] * mult)
    if not parts:
        raise ValueError("empty fiber")
    return reps.direct_sum(parts)


def check_addable(a: FiberSpec, b: FiberSpec) -> bool:
    """Features may only be added when their capsule stacks are identical
    (same capsules, same multiplicities, same order)."""
    return a.entries == b.entries


def require_addable(a: FiberSpec, b: FiberSpec):
    if not check_addable(a, b):
        raise TypeSystemError(f"cannot add fibers of different types: {a} vs {b}")


def act_fiber(spec: FiberSpec, tag: str) -> FiberSpec:
    """Fiber spec after applying a nonlinearity to every capsule."""
    return FiberSpec(
        [(act_capsule(get_capsule(cid), tag).id, m) for cid, m in spec.entries]
    )
