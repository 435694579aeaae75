"""Struggle detection in search sessions with telic/paratelic feature modulation."""

from .features import FeatureTable, SessionFeatureExtractor, extract
from .learn import FMMode, LogisticClassifier, PipelineConfig, ZeroRuleClassifier, compare_fm_runs, kfold_eval
from .model import FEATURE_GROUPS, FEATURE_NAMES, FeatureGroup, Label, Session, State
from .modulation import FeatureModulator, ModulationParams
from .stats import MinMaxNormalizer
from .taxonomy import Taxonomy

__all__ = [
    "FEATURE_GROUPS",
    "FEATURE_NAMES",
    "FMMode",
    "FeatureGroup",
    "FeatureModulator",
    "FeatureTable",
    "Label",
    "LogisticClassifier",
    "MinMaxNormalizer",
    "ModulationParams",
    "PipelineConfig",
    "Session",
    "SessionFeatureExtractor",
    "State",
    "Taxonomy",
    "ZeroRuleClassifier",
    "compare_fm_runs",
    "extract",
    "kfold_eval",
]

__version__ = "0.1.0"
