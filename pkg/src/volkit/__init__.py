"""Volterra kernel extraction from multi-tone spectral data.

Pipeline: plan a collision-free multi-tone sweep, probe a system (or ingest
measured spectra), separate kernel orders per output frequency by least
squares, store kernels canonically, and synthesize time-domain responses to
arbitrary periodic inputs.
"""

from volkit.extraction import (
    ExtractionSettings,
    extract,
    solve_ls,
    unknowns_at_index,
)
from volkit.kernels import KernelArchive, KernelGrid
from volkit.mixing import (
    MixTerm,
    canonicalize_index,
    canonicalize_kernel_args,
    count_terms,
    enumerate_kernels_for_order,
    enumerate_output_indices,
    term_multiplicity,
)
from volkit.probing import (
    ProbeSettings,
    SpectralDataset,
    Waveform,
    analytic_dataset,
    capture_phasors,
    simulate_dataset,
    transient,
)
from volkit.sweeps import (
    SweepPlan,
    ToneSet,
    amplitude_schedule,
    dbm_to_volts,
    reduced_sweep_plan,
    standard_sweep_plan,
    validate_plan,
)
from volkit.synthesis import (
    DiscreteSpectrum,
    TrapezoidPulse,
    nrmse,
    spectrum_of,
    synthesize_order,
    synthesize_total,
)
from volkit.systems import (
    LinearBlock,
    MultiplierCascade,
    SaturatingAmplifier,
    analytic_transfer,
    kernel_oracle,
    lowpass_ladder,
    multiplier_current,
)

__all__ = [
    "DiscreteSpectrum",
    "ExtractionSettings",
    "KernelArchive",
    "KernelGrid",
    "LinearBlock",
    "MixTerm",
    "MultiplierCascade",
    "ProbeSettings",
    "SaturatingAmplifier",
    "SpectralDataset",
    "SweepPlan",
    "ToneSet",
    "TrapezoidPulse",
    "Waveform",
    "amplitude_schedule",
    "analytic_dataset",
    "analytic_transfer",
    "canonicalize_index",
    "canonicalize_kernel_args",
    "capture_phasors",
    "count_terms",
    "dbm_to_volts",
    "enumerate_kernels_for_order",
    "enumerate_output_indices",
    "extract",
    "kernel_oracle",
    "lowpass_ladder",
    "multiplier_current",
    "nrmse",
    "reduced_sweep_plan",
    "simulate_dataset",
    "solve_ls",
    "spectrum_of",
    "standard_sweep_plan",
    "synthesize_order",
    "synthesize_total",
    "term_multiplicity",
    "transient",
    "unknowns_at_index",
    "validate_plan",
]

__version__ = "0.1.0"
