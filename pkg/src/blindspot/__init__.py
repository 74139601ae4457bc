"""Blind-spot detection: find input bytes a program can never let reach its output."""
__version__ = "0.1.0"
