"""Length-of-stay classification for hospital discharge records."""

from .dataset import Dataset, clean, load_csv, profile
from .encoding import PAPER_BINS, BinSpec, FeatureMatrix, LabelVector, build_design_matrix, fit_encoders
from .evaluation import evaluate, stratified_split
from .models import fit_model, load_model, make_params, save_model
from .pipeline import PipelineConfig, load_config, run_pipeline
from .synth import SynthSpec, synthesize_dataset

__version__ = "0.1.0"

__all__ = [
    "Dataset", "load_csv", "clean", "profile",
    "BinSpec", "PAPER_BINS", "FeatureMatrix", "LabelVector", "build_design_matrix", "fit_encoders",
    "evaluate", "stratified_split",
    "fit_model", "make_params", "save_model", "load_model",
    "PipelineConfig", "load_config", "run_pipeline",
    "SynthSpec", "synthesize_dataset",
]
