"""Groundwater-table forecasting with from-scratch RNN/LSTM models."""
from .backend import NAME as BACKEND
from .data import Regime, TimeSeriesFrame, ingest_csv, write_csv
from .models import SequenceModel, gradient_check, load_model, model_forward, save_model
from .synth import HydroConfig, generate_frame

__all__ = [
    "BACKEND",
    "HydroConfig",
    "Regime",
    "SequenceModel",
    "TimeSeriesFrame",
    "generate_frame",
    "gradient_check",
    "ingest_csv",
    "load_model",
    "model_forward",
    "save_model",
    "write_csv",
]
__version__ = "0.1.0"
