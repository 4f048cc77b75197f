"""Time-domain response synthesis from a kernel archive.

The input is periodically extended and represented by a two-sided discrete
spectrum.  The order-n response is the sum over all n-element multisets of
retained bins of ``H_n(f_b1..f_bn) * prod(c_b) * exp(j*2*pi*(sum f)*t)``
weighted by one over the product of bin-repetition factorials (the
multinomial collection of the underlying ordered sum with its 1/n!
prefactor).  Accumulating per output bin keeps the result an exact
one-dimensional spectrum, which is then evaluated on any uniform time grid.

Hermitian input spectra and conjugate-symmetric kernels make every output
spectrum Hermitian up to rounding; the imaginary residue after real
projection is checked and reported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from volkit.kernels import KernelArchive
from volkit.probing import Waveform


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrapezoidPulse:
    """Linear rise, flat top, linear fall.  Callable on time arrays."""

    v0: float = 1.0
    t_rise: float = 1e-9
    t_width: float = 5e-9
    t_fall: float = 1e-9
    t_delay: float = 0.0

    @property
    def support(self) -> float:
        return self.t_delay + self.t_rise + self.t_width + self.t_fall

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float) - self.t_delay
        up = np.clip(t / self.t_rise, 0.0, 1.0)
        down = np.clip((t - self.t_rise - self.t_width) / self.t_fall, 0.0, 1.0)
        return self.v0 * (up - down)

    def fourier_transform(self, f) -> np.ndarray:
        """Exact continuous-time transform (requires t_rise == t_fall)."""
        if abs(self.t_rise - self.t_fall) > 1e-15:
            raise ValueError("closed form requires equal rise and fall times")
        f = np.asarray(f, dtype=float)
        span = self.t_width + self.t_rise
        centre = self.t_delay + 0.5 * (self.t_rise + self.t_width + self.t_fall)
        mag = self.v0 * span * np.sinc(f * span) * np.sinc(f * self.t_rise)
        return mag * np.exp(-2j * np.pi * f * centre)


@dataclass
class DiscreteSpectrum:
    """Two-sided line spectrum of a T-periodic signal.

    ``bins`` are signed harmonic numbers (frequency = bin / period);
    Hermitian symmetry c[-k] = conj(c[k]) is enforced on construction.
    """

    period_s: float
    bins: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=np.int64)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.bins.shape != self.coeffs.shape:
            raise ValueError("bins and coeffs must align")
        if len(np.unique(self.bins)) != len(self.bins):
            raise ValueError("duplicate bins")
        order = np.argsort(self.bins)
        self.bins = self.bins[order]
        self.coeffs = self.coeffs[order]
        lookup = {int(b): i for i, b in enumerate(self.bins)}
        scale = np.abs(self.coeffs).max() if len(self.coeffs) else 0.0
        for i, (b, c) in enumerate(zip(self.bins, self.coeffs)):
            j = lookup.get(-int(b))
            if j is None:
                raise ValueError(f"bin {b} lacks its Hermitian twin")
            if abs(np.conj(self.coeffs[j]) - c) > 1e-9 * scale:
                raise ValueError(f"coefficients at +/-{abs(b)} are not conjugate")
        # enforce exact Hermitian symmetry so real projection is clean
        for i, b in enumerate(self.bins):
            if b > 0:
                j = lookup[-int(b)]
                avg = 0.5 * (self.coeffs[i] + np.conj(self.coeffs[j]))
                self.coeffs[i] = avg
                self.coeffs[j] = np.conj(avg)
            elif b == 0:
                self.coeffs[i] = self.coeffs[i].real

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.bins / self.period_s

    def scaled(self, alpha: float) -> "DiscreteSpectrum":
        return DiscreteSpectrum(self.period_s, self.bins.copy(),
                                alpha * self.coeffs)

    def sample(self, times) -> np.ndarray:
        ph = np.exp(2j * np.pi * np.outer(times, self.freqs_hz))
        return (ph @ self.coeffs).real


@dataclass
class SpectrumInfo:
    n_bins: int
    dropped_power_fraction: float


def spectrum_of(source, period_s: float, bin_cap: float = 1e-4,
                max_bins_per_side: int = 200):
    """Two-sided spectrum of a pulse or waveform, truncated by magnitude.

    Bins below ``bin_cap`` times the peak coefficient are dropped (in
    conjugate pairs); the report carries the dropped power fraction.
    """
    if isinstance(source, TrapezoidPulse):
        if source.support > period_s:
            raise ValueError("period must cover the pulse support")
        n_side = int(np.floor(period_s * 0.5 / 1e-12))  # practically unbounded
        n_side = min(n_side, 20 * max_bins_per_side)
        k = np.arange(-n_side, n_side + 1)
        coeffs = source.fourier_transform(k / period_s) / period_s
    elif isinstance(source, Waveform):
        n = int(round(period_s / source.dt))
        if abs(n * source.dt - period_s) > 1e-9 * period_s:
            raise ValueError("period must be a whole number of samples")
        if n > len(source.samples):
            raise ValueError("waveform shorter than one period")
        spec = np.fft.fft(source.samples[:n]) / n
        half = n // 2
        k = np.arange(-(half - 1), half)
        coeffs = np.concatenate([spec[-(half - 1):], spec[:half]])
    else:
        raise TypeError(f"unsupported source {type(source).__name__}")

    power = np.abs(coeffs) ** 2
    total = power.sum()
    keep = np.abs(coeffs) >= bin_cap * np.abs(coeffs).max()
    keep &= keep[::-1]  # conjugate pairs live or die together
    if keep.sum() > 2 * max_bins_per_side + 1:
        rank = np.argsort(np.abs(coeffs))[::-1]
        allowed = np.zeros_like(keep)
        allowed[rank[: 2 * max_bins_per_side + 1]] = True
        keep &= allowed & allowed[::-1]
    dropped = float(power[~keep].sum() / total) if total > 0 else 0.0
    spectrum = DiscreteSpectrum(period_s=period_s, bins=k[keep],
                                coeffs=coeffs[keep])
    return spectrum, SpectrumInfo(n_bins=len(spectrum.bins),
                                  dropped_power_fraction=dropped)


@dataclass(frozen=True)
class SynthesisSettings:
    max_tuples: int = 5_000_000
    imag_residue_limit: float = 1e-6


@dataclass
class OrderInfo:
    order: int
    n_tuples: int
    n_bins_used: int
    imag_residue: float
    dropped_tuple_fraction: float = 0.0


@dataclass
class OrderedResponse:
    per_order: dict[int, Waveform]
    total: Waveform
    info: dict[int, OrderInfo] = field(default_factory=dict)


def _reachable(spectrum: DiscreteSpectrum, frozen) -> np.ndarray:
    return np.abs(spectrum.freqs_hz) <= frozen.band_edge_hz + frozen.margin_hz


def synthesize_order(archive: KernelArchive, spectrum: DiscreteSpectrum,
                     order: int, duration: float, dt: float,
                     settings: SynthesisSettings | None = None):
    """Order-``order`` time response on a uniform grid; (Waveform, OrderInfo).

    Bins beyond the archive band edge contribute zero kernels and are
    skipped, which band-limits the prediction to the swept region.
    """
    settings = settings or SynthesisSettings()
    if order not in archive.grids:
        raise KeyError(f"archive has no order-{order} grid")
    frozen = archive.frozen(order)
    reach = _reachable(spectrum, frozen)
    bins = spectrum.bins[reach]
    coeffs = spectrum.coeffs[reach]
    freqs = spectrum.freqs_hz[reach]
    nb = len(bins)

    combos = np.array(list(
        itertools.combinations_with_replacement(range(nb), order)),
        dtype=np.intp)
    dropped_fraction = 0.0
    if len(combos) > settings.max_tuples:
        weight_mag = np.abs(coeffs)[combos].prod(axis=1)
        order_by = np.argsort(weight_mag)[::-1]
        kept = np.sort(order_by[: settings.max_tuples])
        dropped_fraction = float(
            weight_mag[order_by[settings.max_tuples:]].sum() /
            max(weight_mag.sum(), 1e-300))
        combos = combos[kept]

    if len(combos):
        args = freqs[combos]                      # (Q, order)
        hvals = frozen.query(args.reshape(-1, order))
        cprod = coeffs[combos].prod(axis=1)
        contrib = hvals * cprod * _repetition_weights(combos)
        out_bins = bins[combos].sum(axis=1)
    else:
        contrib = np.zeros(0, dtype=complex)
        out_bins = np.zeros(0, dtype=np.int64)

    span = int(np.abs(spectrum.bins).max()) * order + 1
    y_spec = np.zeros(2 * span + 1, dtype=complex)
    np.add.at(y_spec, out_bins + span, contrib)

    n = int(round(duration / dt))
    t = dt * np.arange(n)
    s = np.arange(-span, span + 1)
    active = y_spec != 0
    ph = np.exp(2j * np.pi * np.outer(t, s[active] / spectrum.period_s))
    y_cplx = ph @ y_spec[active]
    scale = np.abs(y_cplx).max() if len(y_cplx) else 0.0
    residue = float(np.abs(y_cplx.imag).max() / scale) if scale > 0 else 0.0
    if residue > settings.imag_residue_limit:
        raise SynthesisError(
            f"order-{order} imaginary residue {residue:.2e}; kernel grid and "
            "spectrum are inconsistent")
    info = OrderInfo(order=order, n_tuples=len(combos), n_bins_used=nb,
                     imag_residue=residue,
                     dropped_tuple_fraction=dropped_fraction)
    return Waveform(samples=y_cplx.real, dt=dt, t0=0.0), info


def _repetition_weights(combos: np.ndarray) -> np.ndarray:
    """1 / prod(count!) over repeated entries of each sorted tuple row."""
    q, n = combos.shape
    w = np.ones(q)
    if n == 1:
        return w
    run = np.ones(q)
    for j in range(1, n):
        cont = combos[:, j] == combos[:, j - 1]
        run = np.where(cont, run + 1, 1.0)
        w = np.where(cont, w / run, w)
    return w


def synthesize_total(archive: KernelArchive, spectrum: DiscreteSpectrum,
                     duration: float, dt: float,
                     settings: SynthesisSettings | None = None) -> OrderedResponse:
    """Sum of all archive orders; keeps the per-order decomposition."""
    per_order: dict[int, Waveform] = {}
    info: dict[int, OrderInfo] = {}
    total = None
    for order in sorted(archive.grids):
        wave, oi = synthesize_order(archive, spectrum, order, duration, dt,
                                    settings)
        per_order[order] = wave
        info[order] = oi
        total = wave.samples if total is None else total + wave.samples
    return OrderedResponse(
        per_order=per_order,
        total=Waveform(samples=total, dt=dt, t0=0.0),
        info=info,
    )


def nrmse(prediction: np.ndarray, reference: np.ndarray) -> float:
    """RMS error normalized by the reference's peak-to-peak range."""
    prediction = np.asarray(prediction, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if prediction.shape != reference.shape:
        raise ValueError("shapes must match")
    span = reference.max() - reference.min()
    if span == 0:
        raise ValueError("reference has zero range")
    return float(np.sqrt(np.mean((prediction - reference) ** 2)) / span)
