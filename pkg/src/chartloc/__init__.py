"""chartloc: 3-D radio localization from multi-array OFDM CSI.

Synthetic multipath scenes, classical angle-of-arrival triangulation,
self-supervised channel charting (conventional, likelihood-augmented, and
multistory variants) and an evaluation kit, behind one CLI.

Submodules are loaded lazily so process-level thread caps (BLAS environment
variables) can be applied before numpy is first imported; the CLI depends on
that ordering.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "backend", "tensors", "scenesim", "classical", "beamfeat", "dissim",
    "chartnet", "multistory", "evalkit", "matrixio", "presets", "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib
        module = importlib.import_module("." + name, __name__)
        globals()[name] = module
        return module
    raise AttributeError("module %r has no attribute %r" % (__name__, name))


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
