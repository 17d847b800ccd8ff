"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored.  Keys are normalised so that
``batch-size`` and ``batch_size`` are the same key.
"""
from pathlib import Path


def normalize_key(key):
    return key.strip().replace("-", "_").lower()


def parse_kv(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[normalize_key(key)] = value.strip()
    return out


def load_kv(path):
    return parse_kv(Path(path).read_text())


def dump_kv(mapping):
    return "".join(f"{k} = {mapping[k]}\n" for k in mapping)
