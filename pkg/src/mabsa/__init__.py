"""Two-stage multimodal aspect-based sentiment analysis.

Extraction first (BIO tagging over subwords, decoded to word spans), then
per-aspect sentiment classification that aligns image patches with the
extracted aspect through a learnable-query vision-to-text translator.
"""

__version__ = "0.1.0"

from .corpus import AspectAnnotation, DatasetSplit, Sample, SplitStats
from .harness import AblationFlags, Checkpoint, RunConfig
from .metrics import PRF, PredictionPair
from .supervision import MatcherConfig, TrainingTriple

__all__ = [
    "AblationFlags", "AspectAnnotation", "Checkpoint", "DatasetSplit",
    "MatcherConfig", "PRF", "PredictionPair", "RunConfig", "Sample",
    "SplitStats", "TrainingTriple", "__version__",
]
