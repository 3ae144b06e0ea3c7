"""nullit: whole-program non-null annotation inference for a small stack IR."""

__version__ = "0.1.0"
