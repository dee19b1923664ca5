"""Forward synthesis of CW-ODMR spectra and transverse-field angle sweeps.

Spectra are normalized fluorescence on a unit baseline; dips are Lorentzian
with contrasts set by the microwave coupling of each allowed transition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import spinmodel
from .errors import ContrastOverflowError
from .geometry import TransverseBasis, unit
from .spinmodel import MwFieldNV, SpinConstants, StaticFieldNV


@dataclass(frozen=True)
class LineshapeParams:
    """Dip shape and contrast scaling.

    `model` is "linear" (contrast proportional to Rabi amplitude squared) or
    "saturating" (contrast rolls off once the Rabi amplitude passes
    `omega_ref_mhz`).  The defaults are stated assumptions, not measured
    values: fwhm 8 MHz keeps the two 10.2 mT dips (28 MHz apart) resolved.
    """

    fwhm_mhz: float = 8.0
    contrast_ref: float = 0.02
    omega_ref_mhz: float = 1.0
    model: str = "linear"

    def __post_init__(self):
        if not self.fwhm_mhz > 0:
            raise ValueError("fwhm must be positive")
        if not 0.0 < self.contrast_ref <= 1.0:
            raise ValueError("contrast_ref must lie in (0, 1]")
        if not self.omega_ref_mhz > 0:
            raise ValueError("omega_ref must be positive")
        if self.model not in ("linear", "saturating"):
            raise ValueError(f"unknown intensity model {self.model!r}")

    def contrast(self, omega_mhz: float) -> float:
        x = (omega_mhz / self.omega_ref_mhz) ** 2
        if self.model == "linear":
            return self.contrast_ref * x
        return self.contrast_ref * x / (x + 1.0)


@dataclass(frozen=True)
class CountsMeta:
    """Photon statistics attached to a noisy spectrum."""

    rate_kcps: float
    dwell_s: float
    seed: object

    @property
    def mean_counts(self) -> float:
        return self.rate_kcps * 1000.0 * self.dwell_s


@dataclass
class OdmrSpectrum:
    """Frequency grid (MHz, strictly ascending) and normalized fluorescence."""

    frequencies: np.ndarray
    signal: np.ndarray
    counts_meta: CountsMeta | None = None

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.frequencies.size == 0:
            raise ValueError("frequency grid is empty")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequency grid must be strictly ascending")
        if self.frequencies.shape != self.signal.shape:
            raise ValueError("grid and signal lengths differ")

    def point_sigma(self) -> np.ndarray | None:
        """Per-point shot-noise sigma of the normalized signal, if known."""
        if self.counts_meta is None:
            return None
        n = self.counts_meta.mean_counts
        return np.sqrt(np.maximum(self.signal, 1e-12) / n)


def default_grid(start_mhz: float = 2850.0, stop_mhz: float = 2950.0,
                 step_mhz: float = 0.5) -> np.ndarray:
    n = int(round((stop_mhz - start_mhz) / step_mhz))
    return start_mhz + step_mhz * np.arange(n + 1)


def lorentzian(f: np.ndarray, center_mhz: float, fwhm_mhz: float) -> np.ndarray:
    """Unit-peak Lorentzian."""
    h = 0.5 * fwhm_mhz
    return h * h / ((f - center_mhz) ** 2 + h * h)


def simulate_spectrum(
    consts: SpinConstants,
    static: StaticFieldNV,
    mw: MwFieldNV,
    shape: LineshapeParams,
    grid: np.ndarray,
) -> OdmrSpectrum:
    """Noiseless two-dip CW-ODMR spectrum on a unit baseline."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency grid is empty")
    absorb = np.zeros_like(grid)
    for rec in spinmodel.transition_table(consts, static, mw):
        absorb += shape.contrast(rec.rabi_mhz) * lorentzian(grid, rec.frequency_mhz, shape.fwhm_mhz)
    if np.max(absorb) > 1.0:
        raise ContrastOverflowError(
            f"summed dip contrast reaches {np.max(absorb):.3f} > 1; signal would go negative"
        )
    return OdmrSpectrum(frequencies=grid, signal=1.0 - absorb)


def mw_field_in_nv_frame(basis: TransverseBasis, mw_lab: np.ndarray,
                         amplitude_mt: float) -> MwFieldNV:
    """Express a lab-frame microwave direction in NV-frame angles."""
    m = unit(mw_lab)
    mz = max(-1.0, min(1.0, float(m @ basis.nv_z)))
    zeta = math.acos(mz)
    az = math.atan2(float(m @ basis.e2), float(m @ basis.e1))
    return MwFieldNV(amplitude_mt=amplitude_mt, zeta=zeta, transverse_azimuth=az)


@dataclass
class SweepSeries:
    """Spectra recorded while rotating the static field in the transverse plane."""

    psis: np.ndarray
    spectra: list[OdmrSpectrum]
    basis: TransverseBasis = field(repr=False, default=None)


def simulate_phi_sweep(
    consts: SpinConstants,
    basis: TransverseBasis,
    b_static_mt: float,
    mw_lab: np.ndarray,
    mw_amplitude_mt: float,
    shape: LineshapeParams,
    grid: np.ndarray,
    psis: np.ndarray,
) -> SweepSeries:
    """Sweep the static field direction over psi with theta = pi/2 throughout."""
    psis = np.asarray(psis, dtype=float)
    if psis.size == 0:
        raise ValueError("psi list is empty")
    if not b_static_mt > 0:
        raise ValueError("static field must be positive for a sweep")
    mw = mw_field_in_nv_frame(basis, mw_lab, mw_amplitude_mt)
    spectra = []
    for psi in psis:
        static = StaticFieldNV(b_static_mt, math.pi / 2.0, float(psi) % (2.0 * math.pi))
        spectra.append(simulate_spectrum(consts, static, mw, shape, grid))
    return SweepSeries(psis=psis, spectra=spectra, basis=basis)


def add_shot_noise(spec: OdmrSpectrum, rate_kcps: float, dwell_s: float,
                   seed) -> OdmrSpectrum:
    """Poisson photon noise from the seeded PCG64 generator.

    Each point becomes k / (rate*1000*dwell) with k ~ Poisson(signal * that
    mean).  `seed` may be an int or a numpy SeedSequence; equal seeds give
    bitwise-identical output.
    """
    if not rate_kcps > 0 or not dwell_s > 0:
        raise ValueError("count rate and dwell time must be positive")
    rng = np.random.default_rng(seed)
    n_mean = rate_kcps * 1000.0 * dwell_s
    counts = rng.poisson(spec.signal * n_mean)
    meta = CountsMeta(rate_kcps=rate_kcps, dwell_s=dwell_s,
                      seed=seed if isinstance(seed, int) else repr(seed))
    return OdmrSpectrum(frequencies=spec.frequencies.copy(),
                        signal=counts / n_mean, counts_meta=meta)


def spectrum_to_csv(spec: OdmrSpectrum, path) -> None:
    """Two-column CSV: frequency_mhz, signal."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_mhz", "signal"])
        for f, s in zip(spec.frequencies, spec.signal):
            w.writerow([f"{f:.10g}", f"{s:.12g}"])


def spectrum_from_csv(path) -> OdmrSpectrum:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frequency_mhz", "signal"]:
        raise ValueError(f"{path}: not a spectrum CSV")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return OdmrSpectrum(frequencies=data[:, 0], signal=data[:, 1])


def spectrum_to_json_dict(spec: OdmrSpectrum, shape: LineshapeParams | None = None) -> dict:
    """JSON envelope carrying grid, signal, lineshape params, and noise meta."""
    env = {
        "frequencies_mhz": spec.frequencies.tolist(),
        "signal": spec.signal.tolist(),
    }
    if shape is not None:
        env["lineshape"] = {
            "fwhm_mhz": shape.fwhm_mhz,
            "contrast_ref": shape.contrast_ref,
            "omega_ref_mhz": shape.omega_ref_mhz,
            "model": shape.model,
        }
    if spec.counts_meta is not None:
        env["counts"] = {
            "rate_kcps": spec.counts_meta.rate_kcps,
            "dwell_s": spec.counts_meta.dwell_s,
            "seed": spec.counts_meta.seed,
        }
    return env


def noisy_copy_with_subseed(spec: OdmrSpectrum, rate_kcps: float, dwell_s: float,
                            seed: int, index: int) -> OdmrSpectrum:
    """Shot noise with a per-task child seed derived from (seed, index).

    SeedSequence spawning keeps batch results independent of execution order.
    """
    child = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return add_shot_noise(spec, rate_kcps, dwell_s, child)
