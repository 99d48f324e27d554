"""Allow running as ``python -m meshgnn``."""

from meshgnn.cli import main

main()
