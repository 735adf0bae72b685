from __future__ import annotations

# Import the package before anything else pulls in numpy, so the BLAS thread
# pins in bandred.__init__ take effect for the whole test process.
import bandred  # noqa: F401
