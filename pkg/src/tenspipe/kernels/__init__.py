"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the NumPy fallback has
identical semantics.  ``TENSPIPE_KERNELS=c`` forces the extension
(raises if it was not built), ``=py`` forces the fallback, anything
else (or unset) picks automatically.
"""

import os

# op codes for arith_chain
OP_ADD, OP_SUB, OP_MUL, OP_DIV = 0, 1, 2, 3
# activation codes for dense_forward
ACT_NONE, ACT_RELU, ACT_SIGMOID = 0, 1, 2

_choice = os.environ.get("TENSPIPE_KERNELS", "auto")
if _choice == "py":
    from . import _pykernels as _impl
elif _choice == "c":
    from . import _ckernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        from . import _pykernels as _impl

#: "c" when the compiled extension is active, "py" for the NumPy fallback.
BACKEND = "c" if _impl.__name__.endswith("_ckernels") else "py"

arith_chain = _impl.arith_chain
clamp_trunc = _impl.clamp_trunc
minmax = _impl.minmax
standardize = _impl.standardize
dense_forward = _impl.dense_forward
busy_wait_ns = _impl.busy_wait_ns
