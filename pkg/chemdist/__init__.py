"""chemdist - chemical distances in spatial random graphs"""
__version__ = "1.0.0"
