"""Validation of user-supplied input and output paths."""

from pathlib import Path
from typing import Sequence


def resolve_input_path(path: str) -> Path:
    """Return ``path`` as an existing file.

    Raises:
        ValueError: If the path is empty or does not name a file.
    """
    if not path or not path.strip():
        raise ValueError("Input path cannot be empty.")
    resolved = Path(path)
    if not resolved.is_file():
        raise ValueError(f"File not found: {path}")
    return resolved


def resolve_output_path(path: str, suffixes: Sequence[str] = ()) -> Path:
    """Validate an output file path and create its parent directory.

    Args:
        path: User-supplied destination.
        suffixes: Allowed lower-case suffixes such as ``".csv"``; any suffix
            is accepted when empty.

    Raises:
        ValueError: If the path is empty, names a directory or has a suffix
            outside ``suffixes``.
    """
    if not path or not path.strip():
        raise ValueError("Output path cannot be empty.")
    resolved = Path(path)
    if resolved.is_dir():
        raise ValueError(f"Output path is a directory: {path}")
    if suffixes and resolved.suffix.lower() not in suffixes:
        raise ValueError(f"Output file must end with one of {', '.join(suffixes)}: {path}")
    resolved.parent.mkdir(parents=True, exist_ok=True)
    return resolved
