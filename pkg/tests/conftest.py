"""Allow running the suite from a plain checkout (src layout).

When the package is installed (even editable) this does nothing; the
numpy kernel fallback keeps everything runnable without the compiled
extension.
"""

import pathlib
import sys

try:
    import tpcharq  # noqa: F401
except ImportError:
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))
