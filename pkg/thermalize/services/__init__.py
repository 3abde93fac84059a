"""
Services module - Configuration and run lifecycle
"""
from .experiment_service import ExperimentService
from .presets import list_presets, preset_document, resolve_document

__all__ = ['ExperimentService', 'list_presets', 'preset_document', 'resolve_document']
