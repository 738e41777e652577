"""rcgkit: local retrieval-centric generation over private knowledge bases.

Pipeline: ingest documents into passages, embed them, index them (flat or
HNSW), retrieve and weight knowledge per query, assemble the LLM prompt,
stream the completion. Ships a CLI, an HTTP API, and a Rouge-L evaluation
harness for comparing retrieval-off / retrieval-augmented / retrieval-centric
prompting.
"""

__version__ = "0.1.0"
