"""Point-group action on filter patches and the induced action on fields.

Patch coordinates run over {-(s-1)/2, ..., (s-1)/2}^2 so the patch center
is fixed by every point-group element; the patch space is ordered channel
first, i.e. index = k * s^2 + row-major spatial index.  The induced action
on a whole N x N x K field transports fibers to new grid positions and
mixes their channels by the fiber representation of the point-group part.
"""
from __future__ import annotations

import numpy as np

from . import dihedral, reps
from .dihedral import ELEMENTS, IsometryElement, TorusGrid
from .errors import GroupMismatchError
from .reps import Representation


def patch_coords(s: int) -> list[tuple[int, int]]:
    if s < 1 or s % 2 == 0:
        raise ValueError(f"patch side must be odd, got {s} (no center pixel)")
    c = (s - 1) // 2
    return [(du, dv) for du in range(-c, c + 1) for dv in range(-c, c + 1)]


def spatial_patch_rep(s: int) -> Representation:
    """Permutation rep of D4 on the s^2 patch positions: the basis
    delta at y is sent to the delta at h.y."""
    coords = patch_coords(s)
    index = {xy: i for i, xy in enumerate(coords)}
    mats = {}
    for el in ELEMENTS:
        mat = np.zeros((s * s, s * s))
        for i, xy in enumerate(coords):
            mat[index[el.act(xy)], i] = 1.0
        mats[el.name] = mat
    return Representation(mats, f"patch{s}")


def build_patch_rep(fiber_rep: Representation, s: int) -> Representation:
    """Action of D4 on K x s x s patches with the given fiber rep.

    [pi(h) P](k, x) = sum_k' fiber(h)_{kk'} P(k', h^-1 x); with the
    channel-major layout this is fiber(h) kron spatial(h).
    """
    spatial = spatial_patch_rep(s)
    mats = {
        k: np.kron(fiber_rep.matrices[k], spatial.matrices[k])
        for k in dihedral.ELEMENT_NAMES
    }
    label = f"patch({fiber_rep.name or '?'},{s})"
    return Representation(mats, label)


def build_pi0(s: int, channels: int = 1) -> Representation:
    """The input-space patch rep: pure pixel permutation per channel."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    trivial_stack = Representation(
        {k: np.eye(channels) for k in dihedral.ELEMENT_NAMES}, f"A1x{channels}"
    )
    rep = build_patch_rep(trivial_stack, s)
    rep.name = f"pi0({s},{channels})"
    return rep


def induced_act_field(
    fiber_rep: Representation, g: IsometryElement, data: np.ndarray
) -> np.ndarray:
    """Apply the induced action of g to an N x N x K field array.

    [pi'(tr) f](x) = rho(r) f((tr)^-1 x).
    """
    n = g.grid.n
    if data.shape[0] != n or data.shape[1] != n:
        raise GroupMismatchError(f"field shape {data.shape} vs grid N={n}")
    if data.shape[2] != fiber_rep.dim:
        raise GroupMismatchError(
            f"field has {data.shape[2]} channels, fiber rep dim {fiber_rep.dim}"
        )
    ginv = g.inverse()
    # y = g^-1 x for every grid point x, computed in one shot
    xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    rmat = ginv.h.matrix()
    u = (rmat[0, 0] * xs + rmat[0, 1] * ys + ginv.t[0]) % n
    v = (rmat[1, 0] * xs + rmat[1, 1] * ys + ginv.t[1]) % n
    gathered = data[u, v, :]
    return gathered @ fiber_rep(g.h).T


def induced_matrix(
    fiber_rep: Representation, g: IsometryElement, grid: TorusGrid
) -> np.ndarray:
    """Explicit matrix of the induced action on vec(f), test-only oracle.

    vec index = (x * N + y) * K + k, matching data.reshape(-1).
    """
    n = grid.n
    k = fiber_rep.dim
    size = n * n * k
    if size > 4096:
        raise ValueError(f"explicit induced matrix of size {size} > 4096 refused")
    mat = np.zeros((size, size))
    ginv = g.inverse()
    rho = fiber_rep(g.h)
    for x in range(n):
        for y in range(n):
            u, v = ginv.act((x, y))
            row0 = (x * n + y) * k
            col0 = (u * n + v) * k
            mat[row0 : row0 + k, col0 : col0 + k] = rho
    return mat


def sample_group_elements(grid: TorusGrid, rng: np.random.Generator):
    """Test sample of p4m: all of H, 5 random translations, 10 products."""
    out = [dihedral.point_isometry(h, grid) for h in ELEMENTS]
    translations = [
        dihedral.section((rng.integers(grid.n), rng.integers(grid.n)), grid)
        for _ in range(5)
    ]
    out.extend(translations)
    for _ in range(10):
        h = ELEMENTS[rng.integers(8)]
        t = dihedral.section((rng.integers(grid.n), rng.integers(grid.n)), grid)
        out.append(t * dihedral.point_isometry(h, grid))
    return out


def check_induction_identity(
    samples: int = 50, seed: int = 0, n: int = 9, s: int = 3
) -> dict:
    """Verify that correlation with an equivariant filter bank transforms
    by the induced representation:

        [Psi * [pi(tr) f]](x) = rho(r) [[Psi * f]((tr)^-1 x)]

    for random equivariant banks, random fields, and a generator-closed
    sample of group elements.  Returns the worst absolute deviation seen.
    """
    from .capsules import FiberSpec, fiber_rep
    from .intertwiners import assemble_filter_bank, random_params
    from .network import correlate

    rng = np.random.default_rng(seed)
    grid = TorusGrid(n)
    in_fiber = FiberSpec([("A1", 1)])
    out_fiber = FiberSpec([("regular", 1)])
    rho = fiber_rep(out_fiber)
    pi_in = fiber_rep(in_fiber)

    max_dev = 0.0
    for _ in range(samples):
        params = random_params(in_fiber, out_fiber, s, rng)
        bank = assemble_filter_bank(in_fiber, out_fiber, s, params)
        f = rng.standard_normal((n, n, in_fiber.channels))
        g = sample_group_elements(grid, rng)[rng.integers(23)]
        lhs = correlate(induced_act_field(pi_in, g, f), bank)
        rhs = induced_act_field(rho, g, correlate(f, bank))
        max_dev = max(max_dev, float(np.max(np.abs(lhs - rhs))))
    return {"samples": samples, "max_abs_deviation": max_dev}
