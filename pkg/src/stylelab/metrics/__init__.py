"""Automatic evaluation suite for style transfer outputs."""

from .bleu import bleu, sbleu
from .classifier import NGramClassifier, StyleDistribution, accuracy, train_classifier
from .embeddings import EmbeddingTable, train_embeddings
from .lm import NGramLM, perplexity, train_lm
from .report import EvalReport, evaluate_corpus
from .transport import dc_emd, emd, transport, unit_ground, wmd, wms

__all__ = [
    "EmbeddingTable",
    "EvalReport",
    "NGramClassifier",
    "NGramLM",
    "StyleDistribution",
    "accuracy",
    "bleu",
    "dc_emd",
    "emd",
    "evaluate_corpus",
    "perplexity",
    "sbleu",
    "train_classifier",
    "train_embeddings",
    "train_lm",
    "transport",
    "unit_ground",
    "wmd",
    "wms",
]
