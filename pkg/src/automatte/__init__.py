"""Automatic trimap generation from saliency and superpixels, with learning-based matting."""
from automatte.config import PipelineConfig, load_config
from automatte.kernels import BACKEND
from automatte.pipeline import PipelineResult, run_pipeline, ssd

__all__ = ["BACKEND", "PipelineConfig", "PipelineResult", "load_config", "run_pipeline", "ssd"]
__version__ = "0.1.0"
