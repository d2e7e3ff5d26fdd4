"""Tests for flux lattices, closest-vector queries, and product models."""

import numpy as np
import pytest

from sympdist.errors import UnsupportedRankError
from sympdist.lattice import (
    FluxLattice,
    ProductModel,
    closest_vector,
    embed_path_right,
    is_hamiltonian_endpoint,
    product_lattice_matches_sum,
    product_path,
    split_flux,
    torus_flux_lattice,
)
from sympdist.paths import (
    FluxVector,
    flux,
    hamiltonian_path,
    random_isotopy,
    translation_path,
)
from sympdist.torus import TorusModel, exterior_derivative_residual


class TestTorusLattice:
    def test_unit_torus_generators(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        assert lat.rank == 2
        # generators are signed unit vectors, recovered from translation loops
        mat = np.abs(lat.generator_matrix)
        assert np.allclose(sorted(map(tuple, mat)), [(0.0, 1.0), (1.0, 0.0)], atol=1e-8)
        assert lat.discreteness_gap == pytest.approx(1.0, abs=1e-12)

    def test_scaled_periods(self):
        m = TorusModel(grid_res=32, periods=(2.0, 1.0))
        lat = torus_flux_lattice(m)
        norms = sorted(g.harmonic_l2 for g in lat.generators)
        # loop along the length-2 axis has dual form 2 dy, squared norm 8
        assert norms[0] == pytest.approx(np.sqrt(2.0))
        assert norms[1] == pytest.approx(np.sqrt(8.0))

    def test_product_rank_four(self):
        pm = ProductModel.build(TorusModel(grid_res=16), TorusModel(grid_res=16))
        lat = torus_flux_lattice(pm.product)
        assert lat.rank == 4
        assert lat.discreteness_gap == pytest.approx(1.0)
        assert product_lattice_matches_sum(pm)


class TestClosestVector:
    def test_lattice_point(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        v = lat.element([3, -2])
        assert closest_vector(lat, v).distance == pytest.approx(0.0, abs=1e-12)

    def test_quarter_offset(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        r = closest_vector(lat, FluxVector.from_coeffs(t2_32, [0.0, 0.75]))
        assert r.distance == pytest.approx(0.25)
        assert np.allclose(r.point.coeffs, [0.0, 1.0])

    def test_center_of_cell(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        r = closest_vector(lat, FluxVector.from_coeffs(t2_32, [0.5, 0.5]))
        assert r.distance == pytest.approx(np.sqrt(2.0) / 2.0, abs=1e-12)

    def test_n_best_ordering(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        results = closest_vector(lat, FluxVector.from_coeffs(t2_32, [0.0, 0.3]),
                                 n_best=3)
        dists = [r.distance for r in results]
        assert dists == sorted(dists)
        assert dists[0] == pytest.approx(0.3)
        assert dists[1] == pytest.approx(0.7)

    def test_rank_cap(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        fat = FluxLattice(model=t2_32, generators=lat.generators * 7,
                          gram=np.eye(14))
        with pytest.raises(UnsupportedRankError):
            closest_vector(fat, FluxVector.from_coeffs(t2_32, [0.1, 0.1]))


class TestHamiltonianDetector:
    def test_shear_is_hamiltonian(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        H = 0.2 * np.cos(2 * np.pi * t2_32.grid()[0])
        verdict = is_hamiltonian_endpoint(hamiltonian_path(t2_32, H, 16), lat)
        assert verdict.status == "yes"

    def test_translation_is_not(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        verdict = is_hamiltonian_endpoint(translation_path(t2_32, [0.3, 0.0], 16), lat)
        assert verdict.status == "no"
        assert verdict.flux_distance == pytest.approx(0.3)

    def test_full_period_loop_is(self, t2_32):
        lat = torus_flux_lattice(t2_32)
        verdict = is_hamiltonian_endpoint(translation_path(t2_32, [1.0, 0.0], 16), lat)
        assert verdict.status == "yes"


@pytest.fixture(scope="module")
def pm():
    return ProductModel.build(TorusModel(grid_res=16), TorusModel(grid_res=16))


class TestProducts:
    def test_block_symplectic_matrix(self, pm):
        W = pm.product.symplectic_matrix
        assert np.allclose(W[:2, 2:], 0.0)
        assert np.allclose(W[:2, :2], pm.left.symplectic_matrix)
        assert np.allclose(W[2:, 2:], pm.right.symplectic_matrix)

    def test_embedded_paths_are_closed(self, pm, rng):
        theta = random_isotopy(pm.right, rng, n_steps=8, max_mode=1)
        embedded = embed_path_right(theta, pm)
        assert exterior_derivative_residual(embedded.sample(3)) <= 1e-12

    def test_split_flux_additivity(self, pm, rng):
        p = random_isotopy(pm.left, rng, n_steps=8)
        q = random_isotopy(pm.right, rng, n_steps=8)
        combined = product_path(p, q, pm)
        want = np.concatenate([flux(p).coeffs, flux(q).coeffs])
        assert np.max(np.abs(flux(combined).coeffs - want)) <= 1e-8
        direct = split_flux(pm, flux(p), flux(q))
        assert np.allclose(direct.coeffs, want)
