"""Simulator for quantum RF-over-light communication using continuous-variable
dense coding: EPR-pair noise statistics, an RF-subcarrier modem, Monte Carlo
BER estimation and binary-image transmission."""

from .channel import NoiseModel, calibrate_amplitude, scenario_noise_variance, scenario_snr_offsets_db, transmit
from .harness import BerReport, SweepSpec, reproduce_measured_points, run_ber_trial, run_repeated, sweep
from .imaging import BinaryImage, default_test_image, load_pbm, save_pbm, transmit_image
from .modem import (BitStream, ModemConfig, Scheme, SyncError, Waveform, bit_synchronize, coherent_demodulate,
                    modulate, nrz_encode, symbol_decide, theoretical_ber)
from .optics import (Baseline, CapacityQuery, ChannelScenario, EprParams, QuadratureVariances, Scenario,
                     SqueezingSpectrum, channel_capacity, epr_correlation_variances, r_to_db, scenario_snr,
                     squeeze_db_to_r, squeezing_at_frequency, thermal_submode_variance)
from .rng import ChannelSeed

__version__ = "0.1.0"
