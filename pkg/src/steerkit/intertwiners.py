"""Solving the equivariance constraint rho(h) Psi = Psi pi(h).

The constraint is linear in Psi, so an orthonormal basis of the space of
admissible filter banks is the null space of a stacked system over the
generators {r, m}.  The basis dimension is cross-checked against the
character formula <chi_pi, chi_rho>, turning numerical drift into a loud
error.  Full filter banks are assembled per capsule pair from parameter
matrices Theta ("blocks of blocks").
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import dihedral, reps
from .capsules import Capsule, FiberSpec, get_capsule
from .errors import NotARepresentationError, NumericalFailureError, UtilizationUndefinedError
from .induction import build_patch_rep
from .reps import Representation

#: relative singular-value cutoff for the null-space computation
NULLSPACE_RCOND = 1e-10


def intertwining_number(pi: Representation, rho: Representation) -> int:
    """dim Hom(pi, rho) = <chi_pi, chi_rho>, an exact integer."""
    value = reps.char_inner(pi.character(), rho.character())
    n = round(value)
    if abs(value - n) > 1e-6 or n < 0:
        raise NotARepresentationError(
            f"character inner product {value} is not a non-negative integer"
        )
    return n


def parameter_utilization(pi: Representation, rho: Representation) -> float:
    """mu = (dim pi * dim rho) / dim Hom(pi, rho)."""
    n = intertwining_number(pi, rho)
    if n == 0:
        raise UtilizationUndefinedError(
            "parameter utilization undefined: the Hom space is zero"
        )
    return pi.dim * rho.dim / n


def constraint_matrix(pi: Representation, rho: Representation) -> np.ndarray:
    """Stacked linear system over the generators {r, m} whose null space
    (acting on vec(Psi), row-major) is Hom(pi, rho)."""
    blocks = []
    eye_pi = np.eye(pi.dim)
    eye_rho = np.eye(rho.dim)
    for gen in ("r", "m"):
        # vec(rho(h) Psi - Psi pi(h)) = (rho(h) kron I - I kron pi(h)^T) vec(Psi)
        blocks.append(np.kron(rho.matrices[gen], eye_pi) - np.kron(eye_rho, pi.matrices[gen].T))
    return np.vstack(blocks)


@dataclass
class IntertwinerBasis:
    in_rep: Representation  # pi
    out_rep: Representation  # rho
    basis: list  # n matrices of shape (dim rho, dim pi), Frobenius-orthonormal
    n: int = field(init=False)

    def __post_init__(self):
        self.n = len(self.basis)

    def flat(self) -> np.ndarray:
        """Basis as a (dim rho * dim pi) x n matrix of vec'd elements."""
        d = self.out_rep.dim * self.in_rep.dim
        if self.n == 0:
            return np.zeros((d, 0))
        return np.stack([b.reshape(-1) for b in self.basis], axis=1)


def hom_basis(
    pi: Representation, rho: Representation, tol: float = NULLSPACE_RCOND
) -> IntertwinerBasis:
    """Orthonormal basis of {Psi : rho(h) Psi = Psi pi(h) for all h}."""
    expected = intertwining_number(pi, rho)
    system = constraint_matrix(pi, rho)
    null = scipy.linalg.null_space(system, rcond=tol)
    if null.shape[1] != expected:
        raise NumericalFailureError(
            f"null space dim {null.shape[1]} != character formula {expected} "
            f"for Hom({pi.name or '?'}, {rho.name or '?'})"
        )
    basis = []
    for k in range(null.shape[1]):
        vec = null[:, k]
        # deterministic sign: first coefficient of appreciable size positive
        nz = np.flatnonzero(np.abs(vec) > 1e-8)
        if nz.size and vec[nz[0]] < 0:
            vec = -vec
        basis.append(vec.reshape(rho.dim, pi.dim))
    return IntertwinerBasis(pi, rho, basis)


def project_equivariant(
    psi0: np.ndarray, pi: Representation, rho: Representation
) -> np.ndarray:
    """Group-average projection of an arbitrary matrix onto the Hom space:
    (1/8) sum_h rho(h)^-1 Psi0 pi(h).  Independent oracle for hom_basis."""
    psi0 = np.asarray(psi0, float)
    total = np.zeros_like(psi0)
    for el in dihedral.ELEMENTS:
        total += np.linalg.inv(rho(el)) @ psi0 @ pi(el)
    return total / 8.0


# ---------------------------------------------------------------------------
# capsule-pair basis catalogue (offline/online split)

_pair_cache: dict = {}


def basis_for_pair(in_capsule: str, out_capsule: str, s: int) -> IntertwinerBasis:
    """Cached intertwiner basis between the patch rep of the input capsule
    (at patch size s) and the output capsule's fiber rep."""
    key = (in_capsule, out_capsule, s)
    if key not in _pair_cache:
        pi = build_patch_rep(get_capsule(in_capsule).rep, s)
        rho = get_capsule(out_capsule).rep
        _pair_cache[key] = hom_basis(pi, rho)
    return _pair_cache[key]


def clear_pair_cache():
    _pair_cache.clear()


# ---------------------------------------------------------------------------
# filter-bank parameters and assembly


@dataclass
class FilterBankParams:
    """Parameter matrices Theta keyed (out capsule index, in capsule index)
    into the respective fiber specs; Theta[i, j] has shape
    (dim Hom for the pair) x (n_i * m_j)."""

    theta: dict

    def copy(self) -> "FilterBankParams":
        return FilterBankParams({k: v.copy() for k, v in self.theta.items()})

    def zeros_like(self) -> "FilterBankParams":
        return FilterBankParams({k: np.zeros_like(v) for k, v in self.theta.items()})

    @property
    def size(self) -> int:
        return sum(v.size for v in self.theta.values())


@dataclass
class FilterBank:
    tensor: np.ndarray  # K' x K x s x s
    in_fiber: FiberSpec
    out_fiber: FiberSpec

    @property
    def s(self) -> int:
        return self.tensor.shape[2]

    def flat(self) -> np.ndarray:
        kout = self.tensor.shape[0]
        return self.tensor.reshape(kout, -1)


def param_shapes(in_fiber: FiberSpec, out_fiber: FiberSpec, s: int) -> dict:
    """Shape of every Theta block for a conv layer between two fibers."""
    shapes = {}
    for i, (out_id, n_i) in enumerate(out_fiber.entries):
        for j, (in_id, m_j) in enumerate(in_fiber.entries):
            basis = basis_for_pair(in_id, out_id, s)
            if basis.n == 0 or n_i == 0 or m_j == 0:
                continue
            shapes[(i, j)] = (basis.n, n_i * m_j)
    return shapes


def random_params(
    in_fiber: FiberSpec, out_fiber: FiberSpec, s: int, rng, scale: float | None = None
) -> FilterBankParams:
    """Seeded random Theta; scale defaults to a He-style fan-in factor."""
    theta = {}
    for key, shape in param_shapes(in_fiber, out_fiber, s).items():
        sigma = scale if scale is not None else np.sqrt(2.0 / (in_fiber.channels * s * s))
        theta[key] = sigma * rng.standard_normal(shape)
    return FilterBankParams(theta)


def assemble_filter_bank(
    in_fiber: FiberSpec, out_fiber: FiberSpec, s: int, params: FilterBankParams
) -> FilterBank:
    """Build the full K' x K x s x s filter bank from per-pair parameters.

    Superblock (i, j) is psi^{ij} Theta^{ij} reshaped; copies of a capsule
    occupy contiguous channel ranges in fiber order.
    """
    k_in = in_fiber.channels
    k_out = out_fiber.channels
    flat = np.zeros((k_out, k_in * s * s))
    shapes = param_shapes(in_fiber, out_fiber, s)
    for key, shape in shapes.items():
        if key not in params.theta:
            raise ValueError(f"missing Theta block {key}")
        if params.theta[key].shape != shape:
            raise ValueError(
                f"Theta block {key} has shape {params.theta[key].shape}, want {shape}"
            )
    unknown = set(params.theta) - set(shapes)
    if unknown:
        raise ValueError(f"unknown Theta blocks {sorted(unknown)}")

    row_off = 0
    for i, (out_id, n_i) in enumerate(out_fiber.entries):
        d_out = get_capsule(out_id).dim
        col_off = 0
        for j, (in_id, m_j) in enumerate(in_fiber.entries):
            d_in_patch = get_capsule(in_id).dim * s * s
            if (i, j) in params.theta:
                basis = basis_for_pair(in_id, out_id, s)
                coeffs = basis.flat() @ params.theta[(i, j)]  # (d_out*d_in_patch, n_i*m_j)
                for a in range(n_i):
                    for b in range(m_j):
                        block = coeffs[:, a * m_j + b].reshape(d_out, d_in_patch)
                        flat[
                            row_off + a * d_out : row_off + (a + 1) * d_out,
                            col_off + b * d_in_patch : col_off + (b + 1) * d_in_patch,
                        ] = block
            col_off += m_j * d_in_patch
        row_off += n_i * d_out
    tensor = flat.reshape(k_out, k_in, s, s)
    return FilterBank(tensor, in_fiber, out_fiber)


def bank_gradient_to_params(
    grad_flat: np.ndarray, in_fiber: FiberSpec, out_fiber: FiberSpec, s: int
) -> FilterBankParams:
    """Pull a gradient w.r.t. the flat bank back to Theta blocks
    (transpose of the linear assembly map)."""
    theta = {}
    row_off = 0
    for i, (out_id, n_i) in enumerate(out_fiber.entries):
        d_out = get_capsule(out_id).dim
        col_off = 0
        for j, (in_id, m_j) in enumerate(in_fiber.entries):
            d_in_patch = get_capsule(in_id).dim * s * s
            basis = basis_for_pair(in_id, out_id, s)
            if basis.n and n_i and m_j:
                cols = np.empty((d_out * d_in_patch, n_i * m_j))
                for a in range(n_i):
                    for b in range(m_j):
                        block = grad_flat[
                            row_off + a * d_out : row_off + (a + 1) * d_out,
                            col_off + b * d_in_patch : col_off + (b + 1) * d_in_patch,
                        ]
                        cols[:, a * m_j + b] = block.reshape(-1)
                theta[(i, j)] = basis.flat().T @ cols
            col_off += m_j * d_in_patch
        row_off += n_i * d_out
    return FilterBankParams(theta)


# ---------------------------------------------------------------------------
# basis cache file: sequential records of one JSON header line followed by
# one SFT1 tensor blob holding the flat basis matrix


def default_cache_path() -> str:
    return os.environ.get("EQUISTEER_CACHE", os.path.expanduser("~/.steerkit_basis_cache"))


def save_basis_cache(path: str | None = None):
    """Write every in-memory pair basis to the cache file."""
    import fcntl

    from .tensorfile import write_tensor_bytes

    path = path or default_cache_path()
    with open(path, "wb") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        for (in_id, out_id, s), basis in sorted(_pair_cache.items()):
            header = {
                "in": in_id,
                "out": out_id,
                "s": s,
                "dim_in": basis.in_rep.dim,
                "dim_out": basis.out_rep.dim,
                "n": basis.n,
            }
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(write_tensor_bytes(basis.flat()))
        fcntl.flock(fh, fcntl.LOCK_UN)


def load_basis_cache(path: str | None = None) -> int:
    """Load cached bases back into memory; returns the record count."""
    from .tensorfile import read_tensor_stream

    path = path or default_cache_path()
    count = 0
    with open(path, "rb") as fh:
        while True:
            line = fh.readline()
            if not line:
                break
            header = json.loads(line)
            flat = read_tensor_stream(fh)
            key = (header["in"], header["out"], header["s"])
            pi = build_patch_rep(get_capsule(header["in"]).rep, header["s"])
            rho = get_capsule(header["out"]).rep
            basis = [
                flat[:, k].reshape(header["dim_out"], header["dim_in"])
                for k in range(flat.shape[1])
            ]
            _pair_cache[key] = IntertwinerBasis(pi, rho, [b.astype(float) for b in basis])
            count += 1
    return count
