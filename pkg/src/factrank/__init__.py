"""Contextual ranking of knowledge-graph facts.

Enumerate facts near a query fact, label them by distant supervision over an
entity-linked corpus, and rank them with a path-encoding neural model.
"""

from .enumeration import EnumConfig, enumerate_candidates
from .facts import Fact
from .kg import EntityKind, KnowledgeGraph, Triple, load_graph

__version__ = "0.1.0"

__all__ = ["EntityKind", "EnumConfig", "Fact", "KnowledgeGraph", "Triple",
           "enumerate_candidates", "load_graph"]
