"""Solving for equivariant filter banks.

A filter bank that maps one steerable feature type to another must
commute with the group action on both sides: rho(h) Psi = Psi pi(h).
The solution space is found numerically as a null space, and its
dimension is predicted exactly by character theory.
"""
import numpy as np

from steerkit import (
    build_patch_rep,
    build_pi0,
    char_inner,
    get_capsule,
    hom_basis,
    parameter_utilization,
    regular_rep,
)

pi0 = build_pi0(3, 1)
print("a single-channel 3x3 patch transforms by a dim-9 representation")
print("of type", end=" ")
from steerkit import decompose_type

print(tuple(decompose_type(pi0)))

reg = regular_rep()
basis = hom_basis(pi0, reg)
print(f"\nequivariant maps patch -> regular capsule: {basis.n} dimensions")
print("character prediction:",
      round(char_inner(pi0.character(), reg.character())))

mu = parameter_utilization(pi0, reg)
print(f"parameter utilization mu = {mu:g}: a free 8x9 filter bank has 72")
print(f"parameters, the equivariant one only {basis.n}, and 72/{basis.n} = {mu:g}.")

print("\neach basis element really intertwines (worst residual over h):")
worst = 0.0
for psi in basis.basis:
    for el_name in ("r", "m", "mr2", "r3"):
        from steerkit import element

        el = element(el_name)
        worst = max(worst, np.max(np.abs(reg(el) @ psi - psi @ pi0(el))))
print(f"  {worst:.2e}")

print("\ndimension counts for a few capsule pairs at patch size 3:")
for in_id, out_id in [("A1", "regular"), ("E", "E"), ("qm", "regular"),
                      ("B1", "A2"), ("regular", "regular")]:
    pi = build_patch_rep(get_capsule(in_id).rep, 3)
    rho = get_capsule(out_id).rep
    b = hom_basis(pi, rho)
    print(f"  {in_id:8s} -> {out_id:8s} dim Hom = {b.n}")
