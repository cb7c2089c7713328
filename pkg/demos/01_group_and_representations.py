"""Tour of the square's symmetry group and its representation theory.

The eight roto-reflections of the square form the dihedral group D4.
Every steerable feature type in this package is ultimately a stack of
its five irreducible representations.
"""
import numpy as np

from steerkit import (
    ELEMENTS,
    char_inner,
    decompose_type,
    element,
    enumerate_subgroups,
    irrep_catalog,
    quotient_rep,
    regular_rep,
)

print("== the eight elements ==")
for el in ELEMENTS:
    print(f"{el.name:4s} acts on the plane as\n{el.matrix()}")

r, m = element("r"), element("m")
print("\ncomposition: r * m =", (r * m).name, " m * r =", (m * r).name)
print("so the group is non-abelian, as a reflection and a quarter turn")
print("taken in different orders land on different diagonals.")

print("\n== irreducible representations ==")
for rep in irrep_catalog():
    chi = rep.character().astype(int)
    print(f"{rep.name}: dim {rep.dim}, character {chi.tolist()}")

chars = [rep.character() for rep in irrep_catalog()]
gram = np.array([[char_inner(a, b) for b in chars] for a in chars])
print("\ncharacter inner products (rows/cols A1 A2 B1 B2 E):")
print(gram.astype(int))
print("orthonormal characters mean multiplicities are just inner products.")

print("\n== the regular representation ==")
reg = regular_rep()
print("dim", reg.dim, "decomposes as", tuple(decompose_type(reg)))
print("one copy of each 1-d irrep and two of the 2-d one: 1+1+1+1+2*2 = 8.")

print("\n== subgroups and quotients ==")
for sg in enumerate_subgroups():
    names = sorted(el.name for el in sg.elements)
    q = quotient_rep(sg)
    print(f"order {len(sg.elements)} subgroup {names} -> quotient rep dim {q.dim}")
