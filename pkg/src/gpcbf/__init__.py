"""Streaming Gaussian-process models with deterministic error bounds and a
closed-form control-barrier-function safety filter.

Submodules are imported explicitly (``from gpcbf import gp_stream``); nothing
heavy is loaded at package import time so the CLI can pin BLAS threading
before numpy comes up.
"""

__version__ = "0.1.0"
