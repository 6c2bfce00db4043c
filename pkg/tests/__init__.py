"""Test package marker for pytest importlib mode."""
