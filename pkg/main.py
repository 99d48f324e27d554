"""Backwards-compatible entry point. Prefer ``meshgnn`` or ``python -m meshgnn``."""

from meshgnn.cli import main

if __name__ == "__main__":
    main()
