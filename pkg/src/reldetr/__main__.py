"""Module entrypoint for `python -m reldetr`."""

from __future__ import annotations

from reldetr.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
