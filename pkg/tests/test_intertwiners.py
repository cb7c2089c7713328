import numpy as np
import pytest

from steerkit import dihedral
from steerkit.capsules import FiberSpec, capsule_catalog, fiber_rep, get_capsule
from steerkit.errors import UtilizationUndefinedError
from steerkit.induction import build_patch_rep, build_pi0
from steerkit.intertwiners import (
    assemble_filter_bank,
    basis_for_pair,
    constraint_matrix,
    hom_basis,
    intertwining_number,
    parameter_utilization,
    param_shapes,
    project_equivariant,
    random_params,
)
from steerkit.reps import decompose_type, irrep, regular_rep


def equivariance_residual(psi, pi, rho):
    return max(
        float(np.max(np.abs(rho(el) @ psi - psi @ pi(el))))
        for el in dihedral.ELEMENTS
    )


def test_constraint_matrix_trivial():
    a1 = irrep("A1")
    system = constraint_matrix(a1, a1)
    assert system.shape == (2, 1)
    assert np.array_equal(system, np.zeros((2, 1)))


def test_constraint_rank_matches_character_formula():
    pi = build_pi0(3, 1)
    rho = regular_rep()
    system = constraint_matrix(pi, rho)
    rank = np.linalg.matrix_rank(system, tol=1e-10)
    assert rank == pi.dim * rho.dim - intertwining_number(pi, rho)


def test_generators_suffice():
    # null space over {r, m} equals null space over all 8 elements
    pi = build_pi0(3, 1)
    rho = fiber_rep(FiberSpec([("E", 1), ("qm", 1)]))
    gen_basis = hom_basis(pi, rho)
    full_blocks = []
    for el in dihedral.ELEMENTS:
        full_blocks.append(
            np.kron(rho(el), np.eye(pi.dim)) - np.kron(np.eye(rho.dim), pi(el).T)
        )
    import scipy.linalg

    full_null = scipy.linalg.null_space(np.vstack(full_blocks), rcond=1e-10)
    assert full_null.shape[1] == gen_basis.n
    # same span: project each generator-system basis vector onto the full null space
    flat = gen_basis.flat()
    coeffs, *_ = np.linalg.lstsq(full_null, flat, rcond=None)
    assert np.max(np.abs(full_null @ coeffs - flat)) <= 1e-8


def test_hom_basis_scalars():
    basis = hom_basis(irrep("A1"), irrep("A1"))
    assert basis.n == 1
    assert np.allclose(np.abs(basis.basis[0]), [[1.0]])


def test_hom_basis_pi0_to_regular():
    basis = hom_basis(build_pi0(3, 1), regular_rep())
    assert basis.n == 9
    for psi in basis.basis:
        assert equivariance_residual(psi, build_pi0(3, 1), regular_rep()) <= 1e-8


def test_hom_basis_distinct_irreps_empty():
    assert hom_basis(irrep("E"), irrep("A1")).n == 0


def test_hom_basis_orthonormal():
    basis = hom_basis(build_pi0(3, 1), regular_rep())
    flat = basis.flat()
    assert np.allclose(flat.T @ flat, np.eye(basis.n), atol=1e-10)


def test_intertwining_number_formula():
    pi0 = build_pi0(3, 1)  # type (3,0,1,1,2)
    reg = regular_rep()  # type (1,1,1,1,2)
    assert intertwining_number(pi0, reg) == 3 * 1 + 0 + 1 + 1 + 2 * 2
    assert intertwining_number(irrep("E"), irrep("E")) == 1
    t1 = decompose_type(pi0)
    t2 = decompose_type(reg)
    assert intertwining_number(pi0, reg) == sum(
        a * b for a, b in zip(t1[:4], t2[:4])
    ) + t1.m_E * t2.m_E


def test_parameter_utilization():
    assert parameter_utilization(build_pi0(3, 1), regular_rep()) == 8.0
    assert parameter_utilization(irrep("A1"), irrep("A1")) == 1.0
    assert parameter_utilization(build_pi0(3, 1), irrep("A1")) == 3.0
    with pytest.raises(UtilizationUndefinedError):
        parameter_utilization(irrep("E"), irrep("A1"))


def test_project_equivariant_properties():
    pi = build_pi0(3, 1)
    rho = regular_rep()
    rng = np.random.default_rng(0)
    basis = hom_basis(pi, rho)

    # fixes equivariant inputs
    psi = basis.basis[3]
    assert np.max(np.abs(project_equivariant(psi, pi, rho) - psi)) <= 1e-10

    # idempotent, and image lies in span(hom_basis)
    psi0 = rng.standard_normal((rho.dim, pi.dim))
    once = project_equivariant(psi0, pi, rho)
    twice = project_equivariant(once, pi, rho)
    assert np.max(np.abs(twice - once)) <= 1e-10
    flat = basis.flat()
    coeffs, *_ = np.linalg.lstsq(flat, once.reshape(-1), rcond=None)
    assert np.max(np.abs(flat @ coeffs - once.reshape(-1))) <= 1e-8


def test_projection_oracle_spans_hom_basis():
    # span of group-average projections of the standard basis equals
    # span(hom_basis): the two routes are independent implementations
    pi = fiber_rep(FiberSpec([("E", 1)]))
    rho = fiber_rep(FiberSpec([("E", 1), ("B1", 1)]))
    basis = hom_basis(pi, rho)
    projections = []
    for i in range(rho.dim):
        for j in range(pi.dim):
            e_ij = np.zeros((rho.dim, pi.dim))
            e_ij[i, j] = 1.0
            projections.append(project_equivariant(e_ij, pi, rho).reshape(-1))
    proj_mat = np.stack(projections, axis=1)
    assert np.linalg.matrix_rank(proj_mat, tol=1e-8) == basis.n
    flat = basis.flat()
    c1, *_ = np.linalg.lstsq(proj_mat, flat, rcond=None)
    assert np.max(np.abs(proj_mat @ c1 - flat)) <= 1e-8
    c2, *_ = np.linalg.lstsq(flat, proj_mat, rcond=None)
    assert np.max(np.abs(flat @ c2 - proj_mat)) <= 1e-8


@pytest.mark.parametrize("s", [1, 3, 5])
def test_all_capsule_pairs_match_character_formula(s):
    caps = capsule_catalog()
    for in_cap in caps:
        pi = build_patch_rep(in_cap.rep, s)
        for out_cap in caps:
            n = intertwining_number(pi, out_cap.rep)
            basis = basis_for_pair(in_cap.id, out_cap.id, s)
            assert basis.n == n


def test_basis_elements_equivariant_all_elements():
    pi = build_patch_rep(get_capsule("qm").rep, 3)
    rho = get_capsule("E").rep
    basis = basis_for_pair("qm", "E", 3)
    for psi in basis.basis:
        assert equivariance_residual(psi, pi, rho) <= 1e-8


def test_deterministic_basis():
    from steerkit.intertwiners import clear_pair_cache

    a = basis_for_pair("A1", "regular", 3).flat().copy()
    clear_pair_cache()
    b = basis_for_pair("A1", "regular", 3).flat()
    assert np.array_equal(a, b)


def test_assemble_zero_params():
    in_fiber = FiberSpec([("A1", 1)])
    out_fiber = FiberSpec([("regular", 2)])
    rng = np.random.default_rng(1)
    params = random_params(in_fiber, out_fiber, 3, rng)
    zeros = params.zeros_like()
    bank = assemble_filter_bank(in_fiber, out_fiber, 3, zeros)
    assert np.array_equal(bank.tensor, np.zeros_like(bank.tensor))


def test_assemble_unit_vector_reproduces_basis_element():
    in_fiber = FiberSpec([("regular", 1)])
    out_fiber = FiberSpec([("regular", 1)])
    basis = basis_for_pair("regular", "regular", 3)
    k = 4
    params = random_params(in_fiber, out_fiber, 3, np.random.default_rng(0)).zeros_like()
    params.theta[(0, 0)][k, 0] = 1.0
    bank = assemble_filter_bank(in_fiber, out_fiber, 3, params)
    assert np.allclose(bank.flat(), basis.basis[k])


def test_assembled_bank_is_equivariant():
    in_fiber = FiberSpec([("regular", 1), ("E", 2)])
    out_fiber = FiberSpec([("qm", 2), ("B1", 1)])
    s = 3
    rng = np.random.default_rng(2)
    params = random_params(in_fiber, out_fiber, s, rng)
    bank = assemble_filter_bank(in_fiber, out_fiber, s, params)
    pi = build_patch_rep(fiber_rep(in_fiber), s)
    rho = fiber_rep(out_fiber)
    assert equivariance_residual(bank.flat(), pi, rho) <= 1e-10


def test_parameter_count_accounting():
    in_fiber = FiberSpec([("regular", 2), ("E", 1)])
    out_fiber = FiberSpec([("regular", 1), ("A1", 3)])
    s = 3
    shapes = param_shapes(in_fiber, out_fiber, s)
    total = sum(np.prod(v) for v in shapes.values())
    expected = 0
    for out_id, n_i in out_fiber.entries:
        for in_id, m_j in in_fiber.entries:
            expected += basis_for_pair(in_id, out_id, s).n * n_i * m_j
    assert total == expected


def test_shape_mismatch_rejected():
    in_fiber = FiberSpec([("A1", 1)])
    out_fiber = FiberSpec([("regular", 1)])
    params = random_params(in_fiber, out_fiber, 3, np.random.default_rng(0))
    params.theta[(0, 0)] = params.theta[(0, 0)][:, :0]
    with pytest.raises(ValueError):
        assemble_filter_bank(in_fiber, out_fiber, 3, params)


def test_basis_cache_file_round_trip(tmp_path):
    from steerkit import intertwiners

    basis_for_pair("A1", "regular", 3)
    basis_for_pair("E", "qm", 1)
    path = str(tmp_path / "cache.bin")
    intertwiners.save_basis_cache(path)
    before = {k: v.flat().copy() for k, v in intertwiners._pair_cache.items()}
    intertwiners.clear_pair_cache()
    count = intertwiners.load_basis_cache(path)
    assert count == len(before)
    for key, flat in before.items():
        # SFT1 stores float32, so round-trip is only float32-exact
        assert np.allclose(intertwiners._pair_cache[key].flat(), flat, atol=1e-6)
    intertwiners.clear_pair_cache()


def test_cache_env_override(tmp_path, monkeypatch):
    from steerkit import intertwiners

    target = str(tmp_path / "env_cache.bin")
    monkeypatch.setenv("EQUISTEER_CACHE", target)
    assert intertwiners.default_cache_path() == target
