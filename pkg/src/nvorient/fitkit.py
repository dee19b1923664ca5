"""Damped Gauss-Newton (Levenberg-Marquardt) fitting plus the two models the
pipeline needs: multi-Lorentzian dip extraction and the a*cos^2(psi-psi0)+b
intensity law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, SingularNormalEquationsError
from .odmrsim import OdmrSpectrum


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray | None
    residual_norm: float
    converged: bool
    iterations: int

    @property
    def sigmas(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))

    def to_json_dict(self) -> dict:
        return {
            "params": self.params.tolist(),
            "sigmas": None if self.sigmas is None else self.sigmas.tolist(),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def numeric_jacobian(residuals, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with per-parameter relative steps."""
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(residuals(x))
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(residuals(xp)) - np.asarray(residuals(xm))) / (2.0 * h)
    return jac


def nls_fit(
    residuals,
    x0,
    jacobian=None,
    max_iter: int = 100,
    tol: float = 1e-10,
    damping: float = 1e-3,
    scale_covariance: bool = True,
) -> FitResult:
    """Levenberg-Marquardt minimization of sum(residuals(x)^2).

    The damping factor is multiplied by 10 on a rejected step and divided by
    10 on an accepted one.  Convergence is declared when the relative
    reduction of the residual norm falls below `tol`.  When
    `scale_covariance` is set, the covariance is (J^T J)^-1 times the reduced
    chi-square; leave it unset when the residuals are already sigma-weighted.
    """
    x = np.asarray(x0, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial parameters must be finite")
    jac_fn = jacobian if jacobian is not None else (lambda p: numeric_jacobian(residuals, p))
    r = np.asarray(residuals(x), dtype=float)
    if r.size < x.size:
        raise ValueError("fewer data points than parameters")
    cost = float(r @ r)
    lam = damping
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jac = np.asarray(jac_fn(x), dtype=float)
        g = jac.T @ r
        jtj = jac.T @ jac
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-30)), -g)
            except np.linalg.LinAlgError as exc:
                raise SingularNormalEquationsError(str(exc)) from exc
            if not np.all(np.isfinite(step)):
                raise SingularNormalEquationsError("non-finite LM step")
            x_try = x + step
            r_try = np.asarray(residuals(x_try), dtype=float)
            cost_try = float(r_try @ r_try)
            if np.isfinite(cost_try) and cost_try <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        rel_drop = (cost - cost_try) / max(cost, 1e-300)
        x, r, cost = x_try, r_try, cost_try
        lam = max(lam / 10.0, 1e-12)
        if rel_drop < tol:
            converged = True
            break
    cov = None
    try:
        jac = np.asarray(jac_fn(x), dtype=float)
        jtj = jac.T @ jac
        cov = np.linalg.inv(jtj)
        if scale_covariance:
            dof = max(r.size - x.size, 1)
            cov = cov * (cost / dof)
        cov = 0.5 * (cov + cov.T)
    except np.linalg.LinAlgError:
        cov = None
    return FitResult(params=x, covariance=cov, residual_norm=math.sqrt(cost),
                     converged=converged, iterations=it)


# ---------------------------------------------------------------------------
# Multi-Lorentzian dip model
# ---------------------------------------------------------------------------

@dataclass
class DipEstimate:
    """Fitted Lorentzian dip: center/fwhm in MHz, depth on the unit baseline."""

    center_mhz: float
    fwhm_mhz: float
    depth: float
    depth_sigma: float


def _dip_model(params: np.ndarray, f: np.ndarray, n_dips: int,
               fixed_centers: np.ndarray | None = None) -> np.ndarray:
    # params: [baseline, fwhm, c1, d1, ...] or [baseline, fwhm, d1, ...] when
    # centers are held fixed (shared fwhm in both layouts)
    base, fwhm = params[0], params[1]
    h2 = (0.5 * fwhm) ** 2
    y = np.full_like(f, base)
    for k in range(n_dips):
        if fixed_centers is None:
            c, d = params[2 + 2 * k], params[3 + 2 * k]
        else:
            c, d = fixed_centers[k], params[2 + k]
        y -= d * h2 / ((f - c) ** 2 + h2)
    return y


def _dip_jacobian(params: np.ndarray, f: np.ndarray, n_dips: int,
                  fixed_centers: np.ndarray | None = None) -> np.ndarray:
    base, fwhm = params[0], params[1]
    h = 0.5 * fwhm
    jac = np.zeros((f.size, params.size))
    jac[:, 0] = 1.0
    for k in range(n_dips):
        if fixed_centers is None:
            c, d = params[2 + 2 * k], params[3 + 2 * k]
        else:
            c, d = fixed_centers[k], params[2 + k]
        delta = f - c
        den = delta ** 2 + h * h
        lor = h * h / den
        # d(model)/d(fwhm) = -d * h * delta^2 / den^2, accumulated over dips
        jac[:, 1] += -d * h * delta ** 2 / den ** 2
        if fixed_centers is None:
            jac[:, 2 + 2 * k] = -d * 2.0 * h * h * delta / den ** 2
            jac[:, 3 + 2 * k] = -lor
        else:
            jac[:, 2 + k] = -lor
    return jac


def fit_dips(
    spec: OdmrSpectrum,
    init_centers_mhz,
    init_fwhm_mhz: float = 8.0,
    fix_centers: bool = False,
    max_iter: int = 200,
) -> list[DipEstimate]:
    """Fit n Lorentzian dips (shared fwhm, free baseline) to a spectrum.

    Uses the spectrum's shot-noise sigmas as weights when present.  With
    `fix_centers` the centers are pinned to the supplied values (appropriate
    when the transition frequencies are known independently; keeps near-zero
    dips from wandering).  Returns estimates ordered by center; warns when
    fitted dips overlap within one linewidth.
    """
    centers = [float(c) for c in init_centers_mhz]
    f, y = spec.frequencies, spec.signal
    if any(c < f[0] or c > f[-1] for c in centers):
        raise ValueError("initial dip centers must lie inside the frequency grid")
    n = len(centers)
    sigma = spec.point_sigma()
    fixed = np.array(centers) if fix_centers else None
    x0 = np.empty(2 + (n if fix_centers else 2 * n))
    x0[0] = float(np.median(y))
    x0[1] = init_fwhm_mhz
    for k, c in enumerate(centers):
        guess = max(x0[0] - float(np.interp(c, f, y)), 1e-4)
        if fix_centers:
            x0[2 + k] = guess
        else:
            x0[2 + 2 * k] = c
            x0[3 + 2 * k] = guess

    if sigma is None:
        res = lambda p: _dip_model(p, f, n, fixed) - y
        jac = lambda p: _dip_jacobian(p, f, n, fixed)
        scale_cov = True
    else:
        res = lambda p: (_dip_model(p, f, n, fixed) - y) / sigma
        jac = lambda p: _dip_jacobian(p, f, n, fixed) / sigma[:, None]
        scale_cov = False
    fit = nls_fit(res, x0, jacobian=jac, max_iter=max_iter, tol=1e-12,
                  scale_covariance=scale_cov)
    sig = fit.sigmas if fit.sigmas is not None else np.full(x0.size, np.nan)
    if fix_centers:
        dips = [
            DipEstimate(center_mhz=centers[k], fwhm_mhz=float(abs(fit.params[1])),
                        depth=float(fit.params[2 + k]), depth_sigma=float(sig[2 + k]))
            for k in range(n)
        ]
    else:
        dips = [
            DipEstimate(center_mhz=float(fit.params[2 + 2 * k]),
                        fwhm_mhz=float(abs(fit.params[1])),
                        depth=float(fit.params[3 + 2 * k]),
                        depth_sigma=float(sig[3 + 2 * k]))
            for k in range(n)
        ]
    dips.sort(key=lambda d: d.center_mhz)
    for a, b in zip(dips, dips[1:]):
        if abs(b.center_mhz - a.center_mhz) < a.fwhm_mhz:
            warnings.warn("fitted dips overlap within one linewidth", stacklevel=2)
    return dips


# ---------------------------------------------------------------------------
# a*cos^2(psi - psi0) + b intensity law
# ---------------------------------------------------------------------------

@dataclass
class Cos2Fit:
    a: float
    b: float
    psi0: float
    sigma_psi0: float
    sigma_a: float
    fit: FitResult


def _cos2_model(params: np.ndarray, psis: np.ndarray) -> np.ndarray:
    a, b, psi0 = params
    return a * np.cos(psis - psi0) ** 2 + b


def _cos2_jacobian(params: np.ndarray, psis: np.ndarray) -> np.ndarray:
    a, _, psi0 = params
    d = psis - psi0
    jac = np.empty((psis.size, 3))
    jac[:, 0] = np.cos(d) ** 2
    jac[:, 1] = 1.0
    jac[:, 2] = a * np.sin(2.0 * d)
    return jac


def fit_cos2(psis, depths, depth_sigmas=None) -> Cos2Fit:
    """Weighted fit of a*cos^2(psi-psi0)+b with psi0 reported in [0, pi).

    psi0 is initialized by a 180-point grid scan (linear in a, b at each trial
    phase) before the nonlinear refinement, avoiding the period-pi local
    minimum.  Raises DegenerateFitError when the fitted amplitude is not
    significant (a <= 3*sigma_a).
    """
    psis = np.asarray(psis, dtype=float)
    depths = np.asarray(depths, dtype=float)
    if psis.size < 4 or np.unique(np.round(psis, 12)).size < 4:
        raise ValueError("need at least 4 distinct psi values")
    if np.ptp(psis) <= math.pi / 2.0:
        raise ValueError("psi values must span more than pi/2")
    if depth_sigmas is not None:
        w = 1.0 / np.asarray(depth_sigmas, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("depth sigmas must be positive and finite")
    else:
        w = np.ones_like(depths)

    best = None
    for psi0 in np.linspace(0.0, math.pi, 180, endpoint=False):
        design = np.column_stack([np.cos(psis - psi0) ** 2, np.ones_like(psis)]) * w[:, None]
        sol, *_ = np.linalg.lstsq(design, depths * w, rcond=None)
        r = design @ sol - depths * w
        cost = float(r @ r)
        if best is None or cost < best[0]:
            best = (cost, psi0, sol)
    _, psi0, (a0, b0) = best

    res = lambda p: (_cos2_model(p, psis) - depths) * w
    jac = lambda p: _cos2_jacobian(p, psis) * w[:, None]
    fit = nls_fit(res, np.array([a0, b0, psi0]), jacobian=jac, tol=1e-14,
                  scale_covariance=depth_sigmas is None)
    a, b, psi0 = fit.params
    if a < 0:  # -A*cos^2(x) + b == A*cos^2(x - pi/2) + (b - A)
        a, b, psi0 = -a, b + a, psi0 + math.pi / 2.0
    psi0 = psi0 % math.pi
    sig = fit.sigmas if fit.sigmas is not None else np.full(3, np.nan)
    sigma_a, sigma_psi0 = float(sig[0]), float(sig[2])
    if not np.isfinite(sigma_a) or a <= 3.0 * sigma_a:
        raise DegenerateFitError(
            f"modulation amplitude {a:.3g} not significant (sigma {sigma_a:.3g})"
        )
    return Cos2Fit(a=float(a), b=float(b), psi0=float(psi0),
                   sigma_psi0=sigma_psi0, sigma_a=sigma_a, fit=fit)
