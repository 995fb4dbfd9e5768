"""Next-token probability extraction into PSEQ files."""

from .extract import ExtractConfig, ExtractionError, ExtractReport, extract

__version__ = "0.1.0"
