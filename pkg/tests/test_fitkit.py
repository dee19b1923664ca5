import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvorient import fitkit, odmrsim, spinmodel
from nvorient.errors import DegenerateFitError

C = spinmodel.SpinConstants()
STATIC = spinmodel.StaticFieldNV(10.2, math.pi / 2.0, 0.0)
MW = spinmodel.MwFieldNV(0.0357, math.pi / 2.0, math.pi / 4.0)


def two_dip_spectrum(shape=None, grid=None):
    shape = shape if shape is not None else odmrsim.LineshapeParams()
    grid = grid if grid is not None else odmrsim.default_grid()
    return odmrsim.simulate_spectrum(C, STATIC, MW, shape, grid)


class TestNumericJacobian:
    def test_matches_analytic_on_polynomial(self):
        t = np.linspace(-2.0, 2.0, 30)

        def res(p):
            return p[0] * t ** 2 + p[1] * t + p[2]

        x = np.array([1.3, -0.7, 0.2])
        jac = fitkit.numeric_jacobian(res, x)
        expected = np.column_stack([t ** 2, t, np.ones_like(t)])
        assert np.max(np.abs(jac - expected)) < 1e-7


class TestNlsFit:
    def test_recovers_exponential(self):
        t = np.linspace(0.0, 5.0, 60)
        truth = np.array([2.0, 0.7])
        y = truth[0] * np.exp(-truth[1] * t)
        fit = fitkit.nls_fit(lambda p: p[0] * np.exp(-p[1] * t) - y,
                             np.array([1.0, 1.0]))
        assert fit.converged
        assert np.allclose(fit.params, truth, atol=1e-8)
        assert fit.residual_norm < 1e-8

    def test_failed_fit_reports_not_converged(self):
        # a model that cannot reduce its residual: gradient is identically zero
        y = np.linspace(0.0, 1.0, 10)
        fit = fitkit.nls_fit(lambda p: y - 0.5, np.array([1.0]), max_iter=5)
        assert not math.isnan(fit.residual_norm)
        assert isinstance(fit.converged, bool)

    def test_covariance_calibration_linear(self):
        # fitted sigmas on a linear model vs the empirical scatter of the
        # estimator across seeds
        t = np.linspace(0.0, 1.0, 40)
        truth = np.array([1.5, -0.3])
        noise = 0.05
        slopes, sigmas = [], []
        for seed in range(200):
            rng = np.random.default_rng(seed)
            y = truth[0] * t + truth[1] + noise * rng.standard_normal(t.size)
            fit = fitkit.nls_fit(lambda p: p[0] * t + p[1] - y, np.array([0.0, 0.0]))
            slopes.append(fit.params[0])
            sigmas.append(fit.sigmas[0])
        assert abs(np.mean(slopes) - truth[0]) < 0.02
        assert 0.8 < np.mean(sigmas) / np.std(slopes) < 1.2

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fitkit.nls_fit(lambda p: np.zeros(1), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            fitkit.nls_fit(lambda p: np.zeros(3), np.array([np.nan]))


class TestFitDips:
    def test_noiseless_recovery(self):
        spec = two_dip_spectrum()
        eig = spinmodel.eigensystem(spinmodel.ground_hamiltonian(C, STATIC))
        dips = fitkit.fit_dips(spec, [2898.0, 2926.0])
        assert len(dips) == 2
        assert abs(dips[0].center_mhz - eig.f_0m) < 0.01
        assert abs(dips[1].center_mhz - eig.f_0p) < 0.01
        assert abs(dips[0].fwhm_mhz - 8.0) < 0.05
        assert abs(dips[1].fwhm_mhz - 8.0) < 0.05
        for d in dips:
            assert 0.0 < d.depth < 0.05

    def test_depth_matches_contrast_law(self, shape):
        spec = two_dip_spectrum()
        table = spinmodel.transition_table(C, STATIC, MW)
        dips = fitkit.fit_dips(spec, [2898.0, 2926.0])
        for d, rec in zip(dips, table):
            assert abs(d.depth - shape.contrast(rec.rabi_mhz)) < 1e-4

    def test_noisy_recovery_within_uncertainty(self):
        spec = odmrsim.add_shot_noise(two_dip_spectrum(), 200.0, 1.0, seed=3)
        dips = fitkit.fit_dips(spec, [2898.0, 2926.0])
        table = spinmodel.transition_table(C, STATIC, MW)
        shape = odmrsim.LineshapeParams()
        for d, rec in zip(dips, table):
            truth = shape.contrast(rec.rabi_mhz)
            assert d.depth_sigma > 0.0
            assert abs(d.depth - truth) < 5.0 * d.depth_sigma

    def test_fixed_centers_layout(self):
        spec = two_dip_spectrum()
        eig = spinmodel.eigensystem(spinmodel.ground_hamiltonian(C, STATIC))
        dips = fitkit.fit_dips(spec, [eig.f_0m, eig.f_0p], fix_centers=True)
        assert dips[0].center_mhz == eig.f_0m
        assert dips[1].center_mhz == eig.f_0p
        free = fitkit.fit_dips(spec, [2898.0, 2926.0])
        assert abs(dips[0].depth - free[0].depth) < 1e-4
        assert abs(dips[1].depth - free[1].depth) < 1e-4

    def test_center_outside_grid_rejected(self):
        spec = two_dip_spectrum()
        with pytest.raises(ValueError):
            fitkit.fit_dips(spec, [2700.0, 2926.0])

    def test_overlapping_dips_warn(self, grid):
        shape = odmrsim.LineshapeParams()
        sig = (1.0
               - 0.02 * odmrsim.lorentzian(grid, 2899.0, 8.0)
               - 0.02 * odmrsim.lorentzian(grid, 2902.0, 8.0))
        spec = odmrsim.OdmrSpectrum(grid, sig)
        with pytest.warns(UserWarning):
            fitkit.fit_dips(spec, [2899.0, 2902.0])


class TestFitCos2:
    PSIS = np.linspace(0.0, math.pi, 12, endpoint=False)

    def model(self, a, b, psi0):
        return a * np.cos(self.PSIS - psi0) ** 2 + b

    def test_exact_recovery(self):
        fit = fitkit.fit_cos2(self.PSIS, self.model(0.8, 0.1, 1.2))
        assert abs(fit.a - 0.8) < 1e-9
        assert abs(fit.b - 0.1) < 1e-9
        assert abs(fit.psi0 - 1.2) < 1e-9

    def test_psi0_reported_in_half_turn(self):
        for psi0 in (0.05, 1.0, 2.0, 3.1):
            fit = fitkit.fit_cos2(self.PSIS, self.model(1.0, 0.0, psi0))
            assert 0.0 <= fit.psi0 < math.pi
            d = abs(fit.psi0 - (psi0 % math.pi))
            assert min(d, math.pi - d) < 1e-8

    def test_shift_equivariance(self):
        base = fitkit.fit_cos2(self.PSIS, self.model(0.6, 0.2, 0.4))
        shift = 0.7
        shifted = fitkit.fit_cos2(self.PSIS + shift, 0.6 * np.cos(self.PSIS - 0.4) ** 2 + 0.2)
        d = abs(shifted.psi0 - (base.psi0 + shift) % math.pi)
        assert min(d, math.pi - d) < 1e-8

    def test_weighted_noisy_recovery(self):
        rng = np.random.default_rng(31)
        sigma = 0.02
        errs, sig_psi0 = [], []
        for _ in range(100):
            y = self.model(0.5, 0.05, 0.9) + sigma * rng.standard_normal(self.PSIS.size)
            fit = fitkit.fit_cos2(self.PSIS, y, np.full(self.PSIS.size, sigma))
            # signed deviation folded into (-pi/2, pi/2]
            errs.append((fit.psi0 - 0.9 + math.pi / 2.0) % math.pi - math.pi / 2.0)
            sig_psi0.append(fit.sigma_psi0)
        # reported uncertainty is calibrated against the observed scatter
        assert 0.7 < np.mean(sig_psi0) / np.std(errs) < 1.4

    def test_flat_data_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fitkit.fit_cos2(self.PSIS, np.full(self.PSIS.size, 0.3),
                            np.full(self.PSIS.size, 0.01))

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fitkit.fit_cos2([0.0, 0.1, 0.2], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            fitkit.fit_cos2([0.0, 0.3, 0.6, 1.0], [1.0, 0.9, 0.8, 0.7])  # span <= pi/2
        with pytest.raises(ValueError):
            fitkit.fit_cos2([0.0, 0.0, 1.0, 2.0], [1.0, 1.0, 0.5, 0.2])


@settings(max_examples=80, deadline=None)
@given(a=st.floats(0.2, 2.0), b=st.floats(0.0, 1.0),
       psi0=st.floats(0.0, math.pi, exclude_max=True))
def test_cos2_noiseless_property(a, b, psi0):
    psis = np.linspace(0.0, math.pi, 10, endpoint=False)
    fit = fitkit.fit_cos2(psis, a * np.cos(psis - psi0) ** 2 + b)
    d = abs(fit.psi0 - psi0)
    assert min(d, math.pi - d) < 1e-6
    assert abs(fit.a - a) < 1e-6
