# SPDX-License-Identifier: MIT
"""Transfer learning for VAR models via shared low-rank representations.

Thin re-export of the compiled module. Transition tensors are numpy arrays of
shape (N, N, p) whose mode-1 matricization stacks the lag matrices
horizontally; all tensor values cross the boundary as Fortran-ordered arrays.
"""

try:
    # Installed-package layout: the extension lives inside this package.
    from ._tlvar import *  # noqa: F401,F403
    from ._tlvar import __version__  # noqa: F401
except ImportError:
    # In-tree build: the extension sits on sys.path next to the package.
    from _tlvar import *  # type: ignore  # noqa: F401,F403
    from _tlvar import __version__  # type: ignore  # noqa: F401
