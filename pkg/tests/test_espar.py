import math

import numpy as np
import pytest
import scipy.linalg

from specshare.espar import (
    BasisSet,
    EsparGeometry,
    ReactiveLoads,
    basis_decompose,
    basis_weights,
    circular_geometry,
    currents,
    default_geometry,
    load_geometry,
    pattern_from_currents,
    pattern_from_weights,
)
from specshare.exceptions import ConditioningError, ConfigError, RankDeficiencyError


@pytest.fixture(scope="module")
def geometry():
    return default_geometry()


@pytest.fixture(scope="module")
def basis(geometry):
    return basis_decompose(geometry)


def random_loads(gen, m):
    return ReactiveLoads(gen.uniform(-150.0, 150.0, m - 1))


class TestGeometry:
    def test_default_is_five_elements(self, geometry):
        assert geometry.m == 5 and len(geometry.angle_grid) == 360
        assert np.allclose(geometry.admittance, geometry.admittance.T)
        assert np.all(geometry.steering[:, 0] == 1)

    def test_rejects_asymmetric_admittance(self):
        Y = np.eye(3) / 50
        Y[0, 1] = 0.001
        with pytest.raises(ValueError, match="symmetric"):
            circular_geometry(3, admittance=Y)

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError, match="grid"):
            circular_geometry(5, grid_size=39)

    def test_rejects_singular_admittance(self):
        with pytest.raises(ValueError):
            circular_geometry(3, admittance=np.zeros((3, 3)))

    def test_load_vector_length(self):
        with pytest.raises(ValueError):
            ReactiveLoads((1.0, 2.0)).load_matrix(5)
        with pytest.raises(ValueError):
            ReactiveLoads((math.nan,))


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "g.cfg"
        path.write_text("m = 3\nradius_wavelengths = 0.3\ngrid_size = 48\nadmittance:\n"
                        "0.02,0 0.001,0.001 0.001,0.001\n0.001,0.001 0.02,0 0.001,0.001\n"
                        "0.001,0.001 0.001,0.001 0.02,0\n")
        g = load_geometry(path)
        assert g.m == 3 and len(g.angle_grid) == 48
        assert g.admittance[0, 1] == pytest.approx(0.001 + 0.001j)

    @pytest.mark.parametrize(
        "text",
        [
            "m = 2\nadmittance:\n1,0 0,0\n",
            "m = 2\nadmittance:\n0.02;0 0,0\n0,0 0.02,0\n",
            "colour = red\n",
            "m = two\n",
            "just words\n",
        ],
    )
    def test_bad_files(self, tmp_path, text):
        path = tmp_path / "bad.cfg"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_geometry(path)


class TestCurrents:
    def test_scalar_case(self):
        g = circular_geometry(1, grid_size=8, admittance=[[1 / 50]])
        assert currents(g, ReactiveLoads(()))[0] == pytest.approx(0.01)

    def test_decoupled_elements(self):
        g = circular_geometry(3, grid_size=24)
        i = currents(g, ReactiveLoads((0.0, 0.0)))
        assert np.allclose(i, [0.01, 0, 0], atol=1e-15)

    def test_against_independent_solve(self, geometry):
        loads = ReactiveLoads((10.0, -10.0, 30.0, -30.0))
        v_s = 0.8 - 0.3j
        Y = geometry.admittance
        X = loads.load_matrix(5)
        u = np.eye(5)[:, 0]
        # (Y^-1 + X) i = v u  <=>  (I + Y X) i = v Y u, solved by LU without forming Y^-1
        oracle = scipy.linalg.solve(np.eye(5) + Y @ X, v_s * (Y @ u))
        assert np.allclose(currents(geometry, loads, v_s), oracle, rtol=0, atol=1e-10)

    def test_ill_conditioned(self):
        # element 1 sees a load that exactly cancels its self impedance
        g = circular_geometry(2, grid_size=16, admittance=np.diag([1 / 50, 1j / 25]))
        with pytest.raises(ConditioningError) as info:
            currents(g, ReactiveLoads((25.0,)))
        assert info.value.condition > 1e12


class TestBasis:
    def test_single_element(self):
        g = circular_geometry(1, grid_size=16, admittance=[[0.02]])
        b = basis_decompose(g)
        norm = math.sqrt(g.grid_weight * 16)
        assert np.allclose(b.phi[:, 0], 1 / norm)
        assert b.projections[0, 0] == pytest.approx(norm)

    def test_orthonormal(self, basis):
        assert np.max(np.abs(basis.gram() - np.eye(5))) < 1e-10

    @pytest.mark.parametrize("m", [2, 3, 4, 6])
    def test_orthonormal_other_sizes(self, m):
        b = basis_decompose(circular_geometry(m, grid_size=360))
        assert np.max(np.abs(b.gram() - np.eye(m))) < 1e-10

    def test_columns_reconstructed(self, geometry, basis):
        recon = basis.phi @ basis.projections.T
        assert np.max(np.abs(recon - geometry.steering)) < 1e-9

    def test_rank_deficiency_names_element(self):
        g = circular_geometry(3, grid_size=48)
        steering = g.steering.copy()
        steering[:, 2] = steering[:, 1]
        twin = EsparGeometry(3, g.admittance, g.angle_grid, steering)
        with pytest.raises(RankDeficiencyError) as info:
            basis_decompose(twin)
        assert info.value.element == 2


class TestPatterns:
    def test_zero_currents(self, geometry):
        assert np.all(pattern_from_currents(geometry, np.zeros(5)) == 0)

    def test_single_element_pattern(self):
        g = circular_geometry(1, grid_size=16, admittance=[[0.02]])
        assert np.array_equal(pattern_from_currents(g, [1.0]), g.steering[:, 0])

    def test_single_element_weight(self):
        g = circular_geometry(1, grid_size=16, admittance=[[0.02]])
        b = basis_decompose(g)
        assert basis_weights([0.3], b)[0] == pytest.approx(0.3 * b.projections[0, 0])

    def test_aligned_current_picks_projection_row(self, basis):
        i = np.zeros(5, dtype=complex)
        i[3] = 2 - 1j
        assert np.allclose(basis_weights(i, basis), (2 - 1j) * basis.projections[3])

    def test_unit_weight_gives_basis_column(self, basis):
        for n in range(5):
            assert np.array_equal(pattern_from_weights(np.eye(5)[n], basis), basis.phi[:, n])
        assert np.all(pattern_from_weights(np.zeros(5), basis) == 0)

    def test_round_trip_and_parseval(self, geometry, basis):
        gen = np.random.default_rng(0)
        for _ in range(100):
            i = currents(geometry, random_loads(gen, 5))
            pattern = pattern_from_currents(geometry, i)
            w = basis_weights(i, basis)
            err = np.max(np.abs(pattern_from_weights(w, basis) - pattern))
            assert err < 1e-9 * np.max(np.abs(pattern))
            energy = geometry.grid_weight * np.sum(np.abs(pattern) ** 2)
            assert energy == pytest.approx(np.sum(np.abs(w) ** 2), rel=1e-9)

    def test_dimension_checks(self, geometry, basis):
        with pytest.raises(ValueError):
            pattern_from_currents(geometry, np.ones(4))
        with pytest.raises(ValueError):
            basis_weights(np.ones(4), basis)
        with pytest.raises(ValueError):
            pattern_from_weights(np.ones(6), basis)

    def test_basis_set_gram_uses_grid_weight(self):
        phi = np.eye(4, 2) * 2.0
        assert np.allclose(BasisSet(phi, np.eye(2), 0.25).gram(), np.eye(2))
