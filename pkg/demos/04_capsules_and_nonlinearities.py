"""Capsules, and which nonlinearities each one tolerates.

Pointwise nonlinearities break equivariance unless they commute with
the fiber representation.  Permutation capsules admit relu; signed
permutations need the concatenated relu trick (which doubles the
capsule); anything orthogonal admits a norm-based gate.
"""
import numpy as np

from steerkit import (
    ELEMENTS,
    FiberSpec,
    FeatureField,
    TorusGrid,
    act_fiber,
    act_rep,
    apply_nonlinearity,
    capsule_catalog,
    get_capsule,
)
from steerkit.errors import AdmissibilityError

print("== capsule catalogue ==")
for cap in capsule_catalog():
    tags = ", ".join(sorted(cap.admissible))
    print(f"{cap.id:8s} dim {cap.dim}  admits: {tags}")

print("\n== relu is not admissible for the 2-d irrep ==")
e_cap = get_capsule("E")
v = np.array([0.7, -0.3])
rot = e_cap.rep.matrices["r"]
print("relu(R v) =", np.maximum(rot @ v, 0.0))
print("R relu(v) =", rot @ np.maximum(v, 0.0))
print("these disagree, so the library refuses:")
try:
    f = FeatureField(TorusGrid(5), FiberSpec([("E", 1)]), np.zeros((5, 5, 2)))
    apply_nonlinearity(f, "relu")
except AdmissibilityError as exc:
    print("  AdmissibilityError:", exc)

print("\n== the concatenated-relu rescue ==")
out = act_rep(e_cap, "crelu")
print("crelu doubles E (dim 2) to a dim-4 capsule whose matrices are")
print("signed-free permutations, e.g. under r:")
print(out.matrices["r"].astype(int))
ok = all(
    np.array_equal(
        np.concatenate([np.maximum(e_cap.rep(el) @ v, 0),
                        np.maximum(-(e_cap.rep(el) @ v), 0)]),
        out(el) @ np.concatenate([np.maximum(v, 0), np.maximum(-v, 0)]),
    )
    for el in ELEMENTS
)
print("exact commutation over all 8 elements:", ok)

print("\n== fibers track types through layers ==")
fiber = FiberSpec([("regular", 2), ("E", 1)])
print("input fiber: ", fiber, f"({fiber.channels} channels)")
after = act_fiber(fiber, "crelu")
print("after crelu: ", after, f"({after.channels} channels)")
