import numpy as np
import pytest

from volkit.kernels import KernelArchive, KernelGrid
from volkit.probing import Waveform
from volkit.synthesis import (
    DiscreteSpectrum,
    SynthesisSettings,
    TrapezoidPulse,
    nrmse,
    spectrum_of,
    synthesize_order,
    synthesize_total,
)
from volkit.systems import MultiplierCascade, kernel_oracle, lowpass_ladder

PERIOD = 28e-9


def pulse():
    return TrapezoidPulse(v0=1.0, t_rise=1e-9, t_width=5e-9, t_fall=1e-9)


def oracle_archive(sys=None, period=PERIOD, n_side=64, orders=(1, 2, 3)):
    """Archive whose lattice is exactly the synthesis bin comb."""
    sys = sys or MultiplierCascade()
    df = 1.0 / period
    units = tuple(range(1, n_side + 1))
    grids = {}
    for n in orders:
        grid = KernelGrid(order=n, lattice_units=units, df_hz=df)
        grids[n] = grid
    # fill order 1 fully; higher orders on all sign patterns of the lattice
    for u in units:
        grids[1].insert((u * df,), kernel_oracle(sys, (u * df,), 1))
    if 2 in orders:
        for u1 in units:
            for u2 in units:
                for s in (1, -1):
                    args = (u1 * df, s * u2 * df)
                    grids[2].insert(args, kernel_oracle(sys, args, 2))
    if 3 in orders:
        for u1 in units[::4]:
            for u2 in units[::4]:
                for u3 in units[::4]:
                    for s2 in (1, -1):
                        for s3 in (1, -1):
                            args = (u1 * df, s2 * u2 * df, s3 * u3 * df)
                            grids[3].insert(args, kernel_oracle(sys, args, 3))
    return KernelArchive(grids={n: grids[n] for n in orders},
                         metadata={"system_id": sys.system_id})


class TestSpectrum:
    def test_pure_cosine_has_half_amplitude_lines(self):
        T = 10e-9
        dt = T / 256
        t = np.arange(256) * dt
        wave = Waveform(samples=0.7 * np.cos(2 * np.pi * t / T), dt=dt)
        spec, info = spectrum_of(wave, T, bin_cap=1e-9)
        c = dict(zip(spec.bins.tolist(), spec.coeffs))
        assert c[1] == pytest.approx(0.35)
        assert c[-1] == pytest.approx(0.35)
        assert info.dropped_power_fraction < 1e-12

    def test_trapezoid_closed_form_matches_fft(self):
        p = pulse()
        dt = PERIOD / 16384
        wave = Waveform(samples=p(np.arange(16384) * dt), dt=dt)
        ana, _ = spectrum_of(p, PERIOD, bin_cap=1e-5, max_bins_per_side=80)
        num, _ = spectrum_of(wave, PERIOD, bin_cap=0.0, max_bins_per_side=3000)
        cn = dict(zip(num.bins.tolist(), num.coeffs))
        for b, c in zip(ana.bins.tolist(), ana.coeffs):
            assert c == pytest.approx(cn[b], abs=2e-5)

    def test_first_spectral_null_scale(self):
        p = pulse()
        f = np.linspace(1e6, 250e6, 4000)
        mag = np.abs(p.fourier_transform(f))
        null_f = f[np.argmin(mag)]
        assert null_f == pytest.approx(1.0 / (p.t_width + p.t_rise), rel=0.05)

    def test_pulse_dropped_energy_below_tenth_percent(self):
        _, info = spectrum_of(pulse(), PERIOD, bin_cap=1e-4,
                              max_bins_per_side=200)
        assert info.dropped_power_fraction <= 1e-3

    def test_dc_coefficient_is_pulse_mean(self):
        spec, _ = spectrum_of(pulse(), PERIOD)
        c0 = spec.coeffs[spec.bins == 0][0]
        assert c0 == pytest.approx((5e-9 + 1e-9) / PERIOD)
        assert c0.imag == 0.0

    def test_hermitian_violation_rejected(self):
        with pytest.raises(ValueError, match="conjugate"):
            DiscreteSpectrum(period_s=1.0, bins=[-1, 1],
                             coeffs=[1.0 + 1.0j, 1.0 + 1.0j])
        with pytest.raises(ValueError, match="twin"):
            DiscreteSpectrum(period_s=1.0, bins=[1], coeffs=[1.0])


class TestSynthesizeOrder:
    def test_linear_order_equals_direct_filtering(self):
        # The n=1 synthesizer path must reduce to plain per-bin filtering
        # with the archive's own response (which band-limits and holds the
        # edge sample toward DC by design).
        archive = oracle_archive(MultiplierCascade(include_orders=(1,)),
                                 orders=(1,))
        frozen = archive.frozen(1)
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=60)
        dt = PERIOD / 512
        wave, info = synthesize_order(archive, spec, 1, PERIOD, dt)
        t = np.arange(512) * dt
        direct = np.zeros_like(t)
        for b, c in zip(spec.bins, spec.coeffs):
            h = frozen.query((b / PERIOD,))
            direct += (c * h * np.exp(2j * np.pi * b / PERIOD * t)).real
        scale = np.abs(direct).max()
        assert np.abs(wave.samples - direct).max() <= 1e-9 * scale
        assert info.imag_residue <= 1e-10

    def test_linear_order_tracks_analytic_filtering_in_band(self):
        # Against the exact transfer (not the grid): in-band bins dominate
        # the pulse, so the band-limited prediction stays within a fraction
        # of a percent of full analytic filtering.
        blk = lowpass_ladder()
        archive = oracle_archive(MultiplierCascade(include_orders=(1,)),
                                 orders=(1,))
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=60)
        dt = PERIOD / 512
        wave, _ = synthesize_order(archive, spec, 1, PERIOD, dt)
        t = np.arange(512) * dt
        direct = np.zeros_like(t)
        for b, c in zip(spec.bins, spec.coeffs):
            h = blk.transfer_hz(b / PERIOD)
            direct += (c * h * np.exp(2j * np.pi * b / PERIOD * t)).real
        assert nrmse(wave.samples, direct) < 2e-3

    def test_order_scaling_is_exact_for_halving(self):
        archive = oracle_archive()
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=40)
        dt = PERIOD / 128
        for n in (1, 2, 3):
            base, _ = synthesize_order(archive, spec, n, PERIOD, dt)
            scaled, _ = synthesize_order(archive, spec.scaled(0.5), n,
                                         PERIOD, dt)
            np.testing.assert_array_equal(scaled.samples,
                                          0.5**n * base.samples)

    def test_order_scaling_close_for_irrational_factor(self):
        archive = oracle_archive()
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=40)
        dt = PERIOD / 128
        alpha = 1 / np.sqrt(2.0)
        for n in (2, 3):
            base, _ = synthesize_order(archive, spec, n, PERIOD, dt)
            scaled, _ = synthesize_order(archive, spec.scaled(alpha), n,
                                         PERIOD, dt)
            err = np.abs(scaled.samples - alpha**n * base.samples).max()
            assert err <= 1e-12 * np.abs(base.samples).max()

    def test_bin_order_shuffle_is_harmless(self):
        archive = oracle_archive()
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=40)
        rng = np.random.default_rng(5)
        perm = rng.permutation(len(spec.bins))
        shuffled = DiscreteSpectrum(period_s=spec.period_s,
                                    bins=spec.bins[perm],
                                    coeffs=spec.coeffs[perm])
        dt = PERIOD / 128
        for n in (2, 3):
            a, _ = synthesize_order(archive, spec, n, PERIOD, dt)
            b, _ = synthesize_order(archive, shuffled, n, PERIOD, dt)
            err = np.abs(a.samples - b.samples).max()
            assert err <= 1e-12 * max(np.abs(a.samples).max(), 1e-300)

    def test_zero_spectrum_gives_zero_response(self):
        archive = oracle_archive()
        spec = DiscreteSpectrum(period_s=PERIOD, bins=[-1, 0, 1],
                                coeffs=[0.0, 0.0, 0.0])
        resp = synthesize_total(archive, spec, PERIOD, PERIOD / 64)
        assert np.all(resp.total.samples == 0.0)

    def test_missing_order_raises(self):
        archive = oracle_archive(orders=(1,))
        spec, _ = spectrum_of(pulse(), PERIOD)
        with pytest.raises(KeyError):
            synthesize_order(archive, spec, 2, PERIOD, PERIOD / 64)

    def test_tuple_cap_truncates_deterministically(self):
        archive = oracle_archive()
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=40)
        dt = PERIOD / 128
        full, info_full = synthesize_order(archive, spec, 3, PERIOD, dt)
        capped, info_capped = synthesize_order(
            archive, spec, 3, PERIOD, dt,
            SynthesisSettings(max_tuples=info_full.n_tuples // 2))
        assert info_capped.n_tuples == info_full.n_tuples // 2
        assert 0 < info_capped.dropped_tuple_fraction < 1
        again, _ = synthesize_order(
            archive, spec, 3, PERIOD, dt,
            SynthesisSettings(max_tuples=info_full.n_tuples // 2))
        np.testing.assert_array_equal(capped.samples, again.samples)


class TestTotals:
    def test_orders_sum_to_total(self):
        archive = oracle_archive()
        spec, _ = spectrum_of(pulse(), PERIOD, max_bins_per_side=40)
        resp = synthesize_total(archive, spec, PERIOD, PERIOD / 256)
        summed = sum(w.samples for w in resp.per_order.values())
        np.testing.assert_allclose(resp.total.samples, summed, atol=1e-15)
        assert set(resp.per_order) == {1, 2, 3}
        assert all(i.imag_residue <= 1e-10 for i in resp.info.values())


class TestNrmse:
    def test_zero_error(self):
        r = np.sin(np.linspace(0, 1, 50))
        assert nrmse(r, r) == 0.0

    def test_normalization_by_range(self):
        ref = np.array([0.0, 2.0])
        pred = np.array([0.5, 2.5])
        assert nrmse(pred, ref) == pytest.approx(0.25)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nrmse(np.zeros(3), np.zeros(4))


class TestOrderSeparatedReferences:
    """Synthesized per-order responses match amplitude-separated transients."""

    def test_second_and_third_order_within_5pct(self, bench_archive,
                                                unit_pulse,
                                                bench_order_references):
        from conftest import PULSE_DT, PULSE_PERIOD, PULSE_WINDOW

        spec, _ = spectrum_of(unit_pulse, PULSE_PERIOD)
        for order in (2, 3):
            wave, _ = synthesize_order(bench_archive, spec, order,
                                       PULSE_WINDOW, PULSE_DT)
            ref = bench_order_references[order]
            assert nrmse(wave.samples, ref) <= 0.05
