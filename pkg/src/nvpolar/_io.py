from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

SIG_DIGITS = 9


def fmt(x: float) -> str:
    """Render a float with 9 significant digits, '-0' folded to '0'."""
    s = format(float(x), f".{SIG_DIGITS}g")
    return "0" if s in ("-0", "0") else s


def round_sig(x: float) -> float:
    return float(fmt(x))


def _round_floats(obj):
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_round_floats(obj), indent=2, sort_keys=True) + "\n"


def atomic_write_text(path, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_json(obj))
