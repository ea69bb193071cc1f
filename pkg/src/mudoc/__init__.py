"""Multimodal document-grounded conversational system.

Subpackages: providers (external model adapters), pdfio (PDF parsing),
ingestion (PDF -> index pipeline), index (persistent store), retrieval
(dense scoring), orchestrator (chat turns), server (HTTP + SSE), cli.
"""

__version__ = "0.1.0"
