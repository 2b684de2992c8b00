"""Flat key/value experiment configuration.

Grammar (one setting per line):

    # comment
    [section]
    key = value

Keys are addressed as "section.key". Values are parsed on demand: integers,
floats (fractions like 1/32 are accepted), booleans, comma-separated lists,
bare strings. Validation failures are collected and reported all at once.
"""

from dataclasses import dataclass, field
from typing import Dict, List


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(
            f"  - {p}" for p in self.problems
        ))


def parse_config(text) -> Dict[str, str]:
    values = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError([f"line {lineno}: expected 'key = value', got {raw!r}"])
        key, value = line.split("=", 1)
        full = f"{section}.{key.strip()}" if section else key.strip()
        values[full] = value.strip()
    return values


def parse_number(text):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


@dataclass
class ExperimentConfig:
    """Typed view over the flat settings with exhaustive validation."""

    values: Dict[str, str]
    errors: List[str] = field(default_factory=list)

    def get_str(self, key, default=None, choices=None):
        raw = self.values.get(key, default)
        if raw is None:
            self.errors.append(f"{key}: required setting is missing")
            return default
        if choices is not None and raw not in choices:
            self.errors.append(f"{key}: {raw!r} not one of {sorted(choices)}")
        return raw

    def get_int(self, key, default=None, minimum=None):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                self.errors.append(f"{key}: required setting is missing")
            return default
        try:
            val = int(raw)
        except ValueError:
            self.errors.append(f"{key}: {raw!r} is not an integer")
            return default
        if minimum is not None and val < minimum:
            self.errors.append(f"{key}: {val} is below the minimum {minimum}")
        return val

    def get_float(self, key, default=None, positive=False):
        raw = self.values.get(key)
        if raw is None:
            if default is None:
                self.errors.append(f"{key}: required setting is missing")
            return default
        try:
            val = parse_number(raw)
        except (ValueError, ZeroDivisionError):
            self.errors.append(f"{key}: {raw!r} is not a number")
            return default
        if positive and val <= 0:
            self.errors.append(f"{key}: must be positive, got {val}")
        return val

    def get_float_list(self, key, default=None):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return [parse_number(tok) for tok in raw.split(",") if tok.strip()]
        except (ValueError, ZeroDivisionError):
            self.errors.append(f"{key}: {raw!r} is not a comma-separated number list")
            return default

    def get_int_list(self, key, default=None):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return [int(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError:
            self.errors.append(f"{key}: {raw!r} is not a comma-separated integer list")
            return default

    def raise_if_invalid(self):
        if self.errors:
            raise ConfigError(self.errors)


def apply_overrides(values, overrides):
    """Apply key=value override strings (dotted keys)."""
    out = dict(values)
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not of the form key=value")
            continue
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    if problems:
        raise ConfigError(problems)
    return out
