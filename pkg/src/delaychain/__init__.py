"""Delay-chain spiking working memory for ECG beat classification.

Pipeline: delta-modulator spike encoding -> calibrated chains of slow
integrate-and-fire neurons (temporal pattern held as propagating spikes)
-> threshold-weighted output neurons -> firing-rate features -> logistic
classifier.
"""

from .adm import AdmConfig, SpikeTrain, encode, encode_bank, reconstruct
from .chain import (CalibrationReport, NetworkSpec, build_network, calibrate_pool,
                    measure_preservation, run_network, select_matched)
from .classify import (ClassifierModel, EvalReport, Hyper, PipelineConfig,
                       evaluate, run_experiment, train)
from .dataio import Dataset, Signal, balanced_sample, load_csv, make_synthetic, \
    stratified_split, write_csv
from .neuro import (DELAY_NEURON, OUTPUT_NEURON, MismatchModel, NeuronParams,
                    NeuronRecord, SimConfig, measure_delay, measure_f_curve,
                    sample_mismatch, step_neuron)
from .readout import (FeatureVector, RateSchedule, extract_features, rate_in_window,
                      spatial_profile)

__version__ = "0.1.0"
