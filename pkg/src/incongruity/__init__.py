"""Headline/body incongruity detection with a graph-based hierarchical dual encoder."""
from .corpus import RawArticle, SegmentedArticle, clean_text, load_corpus, prepare_corpus, split_sentences
from .evaluation import Metrics, auc, confusion_counts
from .graph import NewsGraph, batch_graphs, build_graph
from .model import BGHDE, ModelConfig, count_params
from .synthgen import GenType, LabeledSample, build_dataset, generate_incongruent, partition_corpus
from .textenc import Vocabulary, build_vocab, load_embeddings
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BGHDE", "GenType", "LabeledSample", "Metrics", "ModelConfig", "NewsGraph", "RawArticle",
    "SegmentedArticle", "TrainConfig", "Vocabulary", "auc", "batch_graphs", "build_dataset", "build_graph",
    "build_vocab", "clean_text", "confusion_counts", "count_params", "generate_incongruent", "load_corpus",
    "load_embeddings", "partition_corpus", "prepare_corpus", "split_sentences", "train",
]
