"""Python bindings for the neuron interpretation core."""
import json

from . import _neuroscope
from ._neuroscope import (
    Dataset,
    NeuroscopeError,
    average_overlap,
    build_subword_map,
    correlation_distances,
    method_names,
    capabilities,
    mutual_information,
    neuron_vote,
    read_activations,
    render_heatmap,
    round_to_half,
    set_jobs,
    top_words,
    validate,
    write_activations,
    annotate,
)

__all__ = [
    "Dataset",
    "NeuroscopeError",
    "annotate",
    "average_overlap",
    "build_subword_map",
    "capabilities",
    "correlation_distances",
    "evaluate",
    "extract_independent_neurons",
    "method_names",
    "mutual_information",
    "neuron_vote",
    "rank",
    "read_activations",
    "render_heatmap",
    "round_to_half",
    "set_jobs",
    "top_words",
    "validate",
    "write_activations",
]


def rank(dataset, method, **params):
    """Neuron ranking as a dict with 'global', 'per_class' and 'scores'."""
    return json.loads(_neuroscope.rank(dataset, method, json.dumps(params)))


def evaluate(dataset, method, split="test", metric="accuracy", **params):
    return _neuroscope.evaluate(dataset, method, json.dumps(params), split, metric)


def extract_independent_neurons(dataset, threshold=0.3):
    return json.loads(_neuroscope.extract_independent_neurons(dataset, threshold))
