"""Feature fields that transform predictably.

A feature field assigns a typed fiber vector to every point of a torus.
When the input is moved by an isometry, every layer's output moves by
the *same* isometry with a fixed fiber transformation -- no learning
required, it is built into the filter constraints.
"""
import numpy as np

from steerkit import (
    FeatureField,
    FiberSpec,
    IsometryElement,
    TorusGrid,
    assemble_filter_bank,
    correlate,
    element,
    fiber_rep,
    induced_act_field,
    random_params,
)

grid = TorusGrid(9)
in_fiber = FiberSpec([("A1", 1)])
out_fiber = FiberSpec([("regular", 1), ("E", 1)])

rng = np.random.default_rng(0)
f = FeatureField(grid, in_fiber, rng.standard_normal((9, 9, 1)))

params = random_params(in_fiber, out_fiber, 3, rng)
bank = assemble_filter_bank(in_fiber, out_fiber, 3, params)
print(f"filter bank: {bank.tensor.shape[1]} -> {bank.tensor.shape[0]} channels, "
      f"{params.size} free parameters")

g = IsometryElement(element("mr"), (2, 5), grid)
print(f"\nisometry: reflect-rotate 'mr' followed by translation (2, 5)")

pi = fiber_rep(in_fiber)
rho = fiber_rep(out_fiber)

# path 1: transform the input, then convolve
moved_first = correlate(FeatureField(grid, in_fiber,
                                     induced_act_field(pi, g, f.data)), bank)
# path 2: convolve, then transform the output
convolved_first = induced_act_field(rho, g, correlate(f, bank).data)

err = np.max(np.abs(moved_first.data - convolved_first))
print(f"transform-then-convolve vs convolve-then-transform: {err:.2e}")

print("\nthe fiber part is not a plain permutation of channels:")
print("under 'mr' the 2-d irrep block mixes as")
print(rho(element("mr"))[8:10, 8:10])

print("\nsteering the output field directly gives the same thing:")
out = correlate(f, bank)
steered = out.steer(g)
err2 = np.max(np.abs(steered.data - convolved_first))
print(f"  difference {err2:.2e}")
