"""Mesh-based visual place recognition toolkit.

Five-stage pipeline: plan capture routes over street graphs, render
synthetic views from textured meshes, align a synthetic-domain embedding
model to a frozen real-domain teacher, build descriptor databases, and
evaluate retrieval with Recall@K.
"""

__version__ = "0.1.0"
