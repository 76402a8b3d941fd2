"""Flat INI-style configuration: one section per module, units in key names.

A parsed config is a plain dict of sections, each a dict of string values.
Serialization is canonical (sections and keys in file order, `key = value`
lines), so parse -> serialize -> parse is the identity on the records.
Manifests reuse the same format: a config plus [run] and [fingerprints]
sections, which readers ignore, so a manifest can be re-run directly.
"""

from __future__ import annotations

import configparser
import io
from fractions import Fraction

from .field import Grid, make_bump, read_snapshot
from .exponents import Params

_META_SECTIONS = ("run", "fingerprints")


class ConfigError(ValueError):
    pass


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (N vs n, L_length, ...)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return {sec: dict(cp.items(sec)) for sec in cp.sections()}


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())


def dump_config(sections):
    out = io.StringIO()
    first = True
    for sec, items in sections.items():
        if not first:
            out.write("\n")
        first = False
        out.write(f"[{sec}]\n")
        for key, value in items.items():
            out.write(f"{key} = {value}\n")
    return out.getvalue()


def write_config(sections, path):
    with open(path, "w") as fh:
        fh.write(dump_config(sections))


def strip_meta(sections):
    return {k: dict(v) for k, v in sections.items() if k not in _META_SECTIONS}


def _section(cfg, name):
    if name not in cfg:
        raise ConfigError(f"missing [{name}] section")
    return cfg[name]


def get_str(sec, key, default=None):
    if key in sec:
        return sec[key]
    if default is None:
        raise ConfigError(f"missing key {key!r}")
    return default


def get_float(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return float(Fraction(raw))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad numeric value {raw!r} for {key!r}") from None


def get_int(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"bad integer value {raw!r} for {key!r}") from None


def get_floats(sec, key, default=None):
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return tuple(float(Fraction(tok.strip())) for tok in raw.split(",") if tok.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad numeric list {raw!r} for {key!r}") from None


def params_from_config(cfg):
    sec = _section(cfg, "params")
    try:
        return Params(
            N=get_int(sec, "N"),
            p=Fraction(get_str(sec, "p")),
            sigma=Fraction(get_str(sec, "sigma")),
        )
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None


def grid_from_config(cfg, N):
    sec = _section(cfg, "grid")
    try:
        return Grid(N=N, L=get_float(sec, "L_length"), n=get_int(sec, "n"))
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None


def bump_from_config(sec, prefix, grid, seed_profile=None):
    """Build one data profile from `<prefix>_*` keys (or a snapshot file).

    Returns None when `<prefix>_kind = none`.
    """
    if seed_profile is not None:
        return seed_profile
    path = sec.get(f"{prefix}_file")
    if path:
        f = read_snapshot(path)
        if f.grid != grid:
            raise ConfigError(f"{prefix}_file grid does not match [grid]")
        return f
    kind = sec.get(f"{prefix}_kind", "gaussian")
    if kind == "none":
        return None
    if kind == "constant":
        import numpy as np

        from .field import Field

        amp = get_float(sec, f"{prefix}_amplitude_value", default=1.0)
        return Field(grid, np.full(grid.shape, amp))
    center = None
    raw_center = sec.get(f"{prefix}_center")
    if raw_center:
        center = tuple(float(tok) for tok in raw_center.split(","))
    try:
        return make_bump(
            grid,
            kind,
            center=center,
            scale=get_float(sec, f"{prefix}_scale_length2", default=0.25),
            amplitude=get_float(sec, f"{prefix}_amplitude_value", default=1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid {prefix} profile: {exc}") from None
