"""Wave forecasting behind a moored floating breakwater.

Sub-modules: ``autodiff`` (reverse-mode tensors), ``model`` (the forecaster),
``sim`` (synthetic flume), ``training`` / ``metrics`` (harness) and ``cli``.
"""

__version__ = "0.1.0"
