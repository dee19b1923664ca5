"""Inverse problem: sweep minima -> NV_Y axes -> microwave field orientation.

All reconstructed directions are axes (lines): a linearly polarized
microwave field along +m and -m is indistinguishable, so every result
carries an explicit sign ambiguity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fitkit, geometry, odmrsim, spinmodel
from .errors import NearParallelAxesError, PlanarModelError
from .fitkit import Cos2Fit
from .geometry import TransverseBasis, WireScene, sweep_direction, unit
from .odmrsim import LineshapeParams
from .spinmodel import SpinConstants

NV1_AXIS_INDEX = 3  # (1/sqrt(3))[-1,-1,1]
NV2_AXIS_INDEX = 1  # (1/sqrt(3))[1,-1,-1]


@dataclass(frozen=True)
class NvYEstimate:
    """Sign-ambiguous unit axis perpendicular to the NV axis and the MW field."""

    axis: np.ndarray
    sigma_angle: float
    source_nv: int | None = None


@dataclass(frozen=True)
class MwAxisEstimate:
    axis: np.ndarray
    sign_ambiguous: bool = True
    angular_error_deg: float | None = None


def extract_nv_y(basis: TransverseBasis, cos2fit: Cos2Fit,
                 source_nv: int | None = None) -> NvYEstimate:
    """Depth-minimum direction of the L0<->Lp dip: sweep angle psi0 + pi/2."""
    axis = sweep_direction(basis, cos2fit.psi0 + math.pi / 2.0)
    return NvYEstimate(axis=axis, sigma_angle=cos2fit.sigma_psi0, source_nv=source_nv)


def mw_axis_from_two(y1: NvYEstimate, y2: NvYEstimate,
                     truth_axis: np.ndarray | None = None) -> MwAxisEstimate:
    """Normalized cross product of the two NV_Y axes."""
    c = np.cross(y1.axis, y2.axis)
    n = np.linalg.norm(c)
    if n <= 1e-3:
        raise NearParallelAxesError(
            f"NV_Y axes nearly parallel (|cross| = {n:.2e}); direction unresolvable"
        )
    axis = c / n
    err = None
    if truth_axis is not None:
        err = geometry.line_angle_between(axis, truth_axis)
    return MwAxisEstimate(axis=axis, angular_error_deg=err)


def _planar_mw(alpha_deg: float) -> np.ndarray:
    a = math.radians(alpha_deg)
    return np.array([math.sin(a), 0.0, math.cos(a)])


@dataclass(frozen=True)
class PlanarAlphaResult:
    alpha_deg: float
    partner_deg: float
    residual_deg: float

    def nearest_to(self, hint_deg: float) -> float:
        """Ambiguity member nearest a reference angle (circular distance)."""
        d0 = _circ_dist(self.alpha_deg, hint_deg)
        d1 = _circ_dist(self.partner_deg, hint_deg)
        return self.alpha_deg if d0 <= d1 else self.partner_deg


def _circ_dist(a_deg: float, b_deg: float) -> float:
    d = abs(a_deg - b_deg) % 360.0
    return min(d, 360.0 - d)


def planar_alpha(u: np.ndarray, nv_z: np.ndarray) -> PlanarAlphaResult:
    """Invert the perpendicular-axis measurement for an in-plane MW field.

    Scans alpha over [0, 360) at 0.1 degree resolution, minimizing the line
    angle between u and nv_z x m(alpha), then refines the bracket to 1e-6
    degrees.  The pi-degenerate partner is always reported alongside.
    """
    u = unit(u)
    nv_z = unit(nv_z)

    def mismatch(alpha_deg: float) -> float:
        # chord-based line angle; stable down to ~1e-8 deg
        v = np.cross(nv_z, _planar_mw(alpha_deg))
        n = np.linalg.norm(v)
        if n < 1e-12:
            return 90.0
        w = v / n
        if float(u @ w) < 0.0:
            w = -w
        return math.degrees(2.0 * math.asin(min(1.0, 0.5 * np.linalg.norm(u - w))))

    # vectorized coarse scan: maximize |cos| of the line angle
    alphas = np.arange(0.0, 360.0, 0.1)
    rad = np.radians(alphas)
    mw = np.column_stack([np.sin(rad), np.zeros_like(rad), np.cos(rad)])
    v = np.cross(np.broadcast_to(nv_z, mw.shape), mw)
    score = np.abs(v @ u) / np.linalg.norm(v, axis=1)
    best = float(alphas[int(np.argmax(score))])
    step = 0.1
    while step > 1e-8:
        lo = best - step
        cand = [lo + k * (step / 10.0) for k in range(21)]
        best = min(cand, key=mismatch)
        step /= 10.0
    resid = mismatch(best)
    if resid > 1.0:
        raise PlanarModelError(
            f"axis inconsistent with an in-plane microwave field (residual {resid:.3f} deg)"
        )
    best %= 360.0
    return PlanarAlphaResult(alpha_deg=best, partner_deg=(best + 180.0) % 360.0,
                             residual_deg=resid)


def closed_form_alpha_check(u: np.ndarray) -> float:
    """Closed-form planar inversion for the NV axis (1/sqrt(3))[-1,-1,1].

    With u = +-(-cos a, cos a + sin a, sin a)/sqrt(2 + sin 2a) the identity
    sin 2a = (2*u_y^2 - 1)/(u_x^2 + u_z^2) holds exactly; the quadrant of 2a
    follows from sign(u_x^2 - u_z^2) (prop. to cos 2a) and the half-turn from
    the signs of u_z (prop. to sin a) and -u_x (prop. to cos a).  Serves as
    an independent oracle for planar_alpha.
    """
    ux, uy, uz = unit(u)
    denom = ux * ux + uz * uz
    if denom < 1e-12:
        raise ValueError("axis has no in-plane component; alpha undefined")
    ratio = (2.0 * uy * uy - 1.0) / denom
    if abs(ratio) > 1.0 + 1e-9:
        raise ValueError(f"arcsin argument {ratio:.6f} outside [-1, 1]")
    ratio = max(-1.0, min(1.0, ratio))
    cos2a = math.copysign(math.sqrt(max(0.0, 1.0 - ratio * ratio)), ux * ux - uz * uz)
    # ratio plays sin(2a); cos2a carries the sign of cos(2a)
    alpha = math.degrees(math.atan2(ratio, cos2a)) / 2.0 % 180.0
    # resolve the half-turn from whichever component is better conditioned
    if abs(uz) >= abs(ux):
        flip = math.sin(math.radians(alpha)) * uz < 0.0
    else:
        flip = math.cos(math.radians(alpha)) * (-ux) < 0.0
    if flip:
        alpha += 180.0
    return alpha % 360.0


@dataclass(frozen=True)
class NoiseConfig:
    rate_kcps: float
    dwell_s: float
    seed: int


@dataclass
class ChainConfig:
    """Simulation and fitting choices for the end-to-end planar pipeline."""

    constants: SpinConstants = field(default_factory=SpinConstants)
    b_static_mt: float = 10.2
    shape: LineshapeParams = field(default_factory=LineshapeParams)
    grid: np.ndarray = field(default_factory=odmrsim.default_grid)
    psis: np.ndarray = field(default_factory=lambda: np.linspace(0.0, math.pi, 12, endpoint=False))
    noise: NoiseConfig | None = None


@dataclass
class PlanarRunResult:
    alpha_est_deg: float
    alpha_partner_deg: float
    alpha_theory_deg: float
    error_deg: float
    nv_y: NvYEstimate
    cos2: Cos2Fit


def sweep_lp_depths(sweep: odmrsim.SweepSeries, consts: SpinConstants,
                    b_static_mt: float):
    """Fit every sweep spectrum and return L0<->Lp dip depths and sigmas.

    Initial dip centers come from the eigensystem at psi = 0; at theta = pi/2
    the transition frequencies are independent of the sweep angle.
    """
    eig = spinmodel.eigensystem(spinmodel.ground_hamiltonian(
        consts, spinmodel.StaticFieldNV(b_static_mt, math.pi / 2.0, 0.0)))
    centers = [eig.f_0m, eig.f_0p]
    depths, sigmas = [], []
    for spec in sweep.spectra:
        dips = fitkit.fit_dips(spec, centers, fix_centers=True)
        lp = min(dips, key=lambda d: abs(d.center_mhz - eig.f_0p))
        depths.append(lp.depth)
        sigmas.append(lp.depth_sigma)
    noisy = all(s.counts_meta is not None for s in sweep.spectra)
    return np.array(depths), (np.array(sigmas) if noisy else None)


def end_to_end_planar(scene: WireScene, nv_index: int,
                      cfg: ChainConfig | None = None) -> PlanarRunResult:
    """simulate_phi_sweep -> fit_dips -> fit_cos2 -> extract_nv_y -> planar_alpha.

    Truth comes from the wire tangent at the scene position; the reported
    error is the distance to the nearer member of the ambiguity pair.
    """
    cfg = cfg if cfg is not None else ChainConfig()
    nv_z = geometry.crystallographic_axes()[nv_index]
    basis = geometry.transverse_basis(nv_z)
    m = geometry.mw_direction(scene)
    amplitude = geometry.wire_field_magnitude(scene)
    sweep = odmrsim.simulate_phi_sweep(cfg.constants, basis, cfg.b_static_mt, m,
                                       amplitude, cfg.shape, cfg.grid, cfg.psis)
    if cfg.noise is not None:
        sweep.spectra = [
            odmrsim.noisy_copy_with_subseed(s, cfg.noise.rate_kcps, cfg.noise.dwell_s,
                                            cfg.noise.seed, i)
            for i, s in enumerate(sweep.spectra)
        ]
    depths, sigmas = sweep_lp_depths(sweep, cfg.constants, cfg.b_static_mt)
    cos2 = fitkit.fit_cos2(sweep.psis, depths, sigmas)
    nv_y = extract_nv_y(basis, cos2, source_nv=nv_index)
    pa = planar_alpha(nv_y.axis, nv_z)
    truth = math.degrees(math.atan2(m[0], m[2])) % 360.0
    alpha_est = pa.nearest_to(truth)
    return PlanarRunResult(
        alpha_est_deg=alpha_est,
        alpha_partner_deg=(alpha_est + 180.0) % 360.0,
        alpha_theory_deg=truth,
        error_deg=_circ_dist(alpha_est, truth),
        nv_y=nv_y,
        cos2=cos2,
    )


def end_to_end_3d(scene: WireScene, nv_indices: tuple[int, int],
                  cfg: ChainConfig | None = None) -> MwAxisEstimate:
    """Two-orientation reconstruction of the full 3-D microwave axis."""
    i1, i2 = nv_indices
    if i1 == i2:
        raise NearParallelAxesError("the two NV orientations must differ")
    cfg = cfg if cfg is not None else ChainConfig()
    estimates = []
    for slot, idx in enumerate(nv_indices):
        nv_z = geometry.crystallographic_axes()[idx]
        basis = geometry.transverse_basis(nv_z)
        m = geometry.mw_direction(scene)
        amplitude = geometry.wire_field_magnitude(scene)
        sweep = odmrsim.simulate_phi_sweep(cfg.constants, basis, cfg.b_static_mt, m,
                                           amplitude, cfg.shape, cfg.grid, cfg.psis)
        if cfg.noise is not None:
            sweep.spectra = [
                odmrsim.noisy_copy_with_subseed(s, cfg.noise.rate_kcps, cfg.noise.dwell_s,
                                                cfg.noise.seed, 1000 * slot + i)
                for i, s in enumerate(sweep.spectra)
            ]
        depths, sigmas = sweep_lp_depths(sweep, cfg.constants, cfg.b_static_mt)
        cos2 = fitkit.fit_cos2(sweep.psis, depths, sigmas)
        estimates.append(extract_nv_y(basis, cos2, source_nv=idx))
    return mw_axis_from_two(estimates[0], estimates[1],
                            truth_axis=geometry.mw_direction(scene))
