"""Minimal PDF parsing and rasterization for the ingestion pipeline."""

from .objects import PdfFile
from .raster import PdfDocument, PdfPage, open_pdf

__all__ = ["PdfFile", "PdfDocument", "PdfPage", "open_pdf"]
