"""Utils package initialization"""

from .export import ExportManager
from .helpers import DataFormatter, InputValidator

__all__ = ['ExportManager', 'InputValidator', 'DataFormatter']
