"""litmap: turn a document corpus with embeddings into an interactive 2D semantic map.

The package covers the full offline pipeline (ingest, embed, layout, cluster,
label, bundle), the spatial index and retrieval services behind the map, a
selection-grounded agent layer, and the HTTP server that ties them to a
browser client.
"""

__version__ = "0.1.0"
