"""Grids, sampled fields and norms on a truncated periodic box.

Functions on R^N are represented by samples on the uniform grid of the
periodic box [-L, L)^N.  All integrals are rectangle-rule sums, which are
spectrally accurate for smooth data whose mass stays away from the box
boundary; the boundary-shell diagnostic quantifies how far that assumption
holds for a given field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SNAPSHOT_MAGIC = "CRITEX-FIELD v1"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^N with n points per axis.

    n must be a power of two (the propagator uses radix-2 transforms) and at
    least 8; N is 1, 2 or 3.
    """

    N: int
    L: float
    n: int

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise ValueError(f"N must be 1, 2 or 3, got {self.N}")
        if not (self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def shape(self):
        return (self.n,) * self.N

    @property
    def size(self):
        return self.n**self.N

    @property
    def cell_volume(self):
        return self.h**self.N

    def axis(self):
        """Coordinates of one axis: -L, -L+h, ..., L-h."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def r2(self):
        """|x|^2 sampled on the grid (shape ``self.shape``)."""
        ax2 = self.axis() ** 2
        total = np.zeros(self.shape)
        for a in range(self.N):
            shp = [1] * self.N
            shp[a] = self.n
            total = total + ax2.reshape(shp)
        return total


class Field:
    """Immutable real-valued samples on a Grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must all be finite")
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        g = self.grid
        return f"Field(N={g.N}, L={g.L}, n={g.n}, max|u|={np.max(np.abs(self.values)):.6g})"

    def scaled(self, factor):
        return Field(self.grid, self.values * float(factor))


def zero_field(grid):
    return Field(grid, np.zeros(grid.shape))


def integral(f):
    """Signed rectangle-rule quadrature h^N * sum(values)."""
    return f.grid.cell_volume * float(np.sum(f.values))


def lr_norm(f, r):
    """Lebesgue r-norm by grid quadrature; r = inf gives max |values|."""
    if r != math.inf and r < 1:
        raise ValueError(f"r must be >= 1 (or inf), got {r}")
    if r == math.inf:
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    r = float(r)
    with np.errstate(over="ignore"):  # inf is the honest answer for huge fields
        total = float(np.sum(np.abs(f.values) ** r))
    return (f.grid.cell_volume * total) ** (1.0 / r)


def boundary_shell_fraction(f, depth=0.125):
    """Fraction of the L1 mass within depth*L of the box faces.

    Returns 0 for the zero field.  Large values mean the periodic
    truncation is no longer a faithful stand-in for free space.
    """
    g = f.grid
    cut = (1.0 - depth) * g.L
    near = np.abs(g.axis()) >= cut
    mask = np.zeros(g.shape, dtype=bool)
    for a in range(g.N):
        shp = [1] * g.N
        shp[a] = g.n
        mask |= near.reshape(shp)
    absu = np.abs(f.values)
    total = float(np.sum(absu))
    if total == 0.0:
        return 0.0
    return float(np.sum(absu[mask])) / total


@dataclass(frozen=True)
class ForcingSpec:
    """Spatial forcing profile w together with its cached signed mass."""

    profile: Field
    mass: float

    def __post_init__(self):
        actual = integral(self.profile)
        if abs(actual - self.mass) > 1e-12 * max(1.0, abs(actual)):
            raise ValueError(
                f"cached mass {self.mass!r} disagrees with quadrature {actual!r}"
            )

    @classmethod
    def from_profile(cls, profile):
        return cls(profile=profile, mass=integral(profile))

    def scaled(self, factor):
        return ForcingSpec(self.profile.scaled(factor), self.mass * float(factor))


def make_bump(grid, kind, center=None, scale=1.0, amplitude=1.0):
    """Sample a localized profile on the grid.

    kind = "gaussian":      amplitude * exp(-|x - c|^2 / (4*scale))
    kind = "compact_bump":  amplitude * exp(1 - 1/(1 - |x - c|^2/scale^2))
                            inside |x - c| < scale, zero outside.

    For the gaussian, scale plays the role of the heat-kernel width
    parameter a, so amplitude (4*pi*scale)^(-N/2) gives unit mass.  A
    warning is attached when the bump sits too close to the box boundary
    (within 4 effective radii).
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if center is None:
        center = (0.0,) * grid.N
    center = tuple(float(c) for c in center)
    if len(center) != grid.N:
        raise ValueError(f"center must have {grid.N} coordinates")

    ax = grid.axis()
    r2 = np.zeros(grid.shape)
    for a in range(grid.N):
        shp = [1] * grid.N
        shp[a] = grid.n
        r2 = r2 + ((ax - center[a]) ** 2).reshape(shp)

    if kind == "gaussian":
        radius = 4.0 * math.sqrt(scale)
        vals = amplitude * np.exp(-r2 / (4.0 * scale))
    elif kind == "compact_bump":
        radius = scale
        s = r2 / (scale * scale)
        vals = np.zeros(grid.shape)
        inside = s < 1.0
        with np.errstate(divide="ignore"):
            vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    else:
        raise ValueError(f"unknown bump kind {kind!r}")

    margin = min(grid.L - abs(c) for c in center)
    if margin < radius:
        warnings.warn(
            f"{kind} with effective radius {radius:.3g} is within "
            f"{margin:.3g} of the box boundary; truncation may be visible",
            stacklevel=2,
        )
    return Field(grid, vals)


def write_snapshot(f, path):
    """Write a field as header line + row-major little-endian float64."""
    g = f.grid
    header = f"{SNAPSHOT_MAGIC} N={g.N} L={g.L:.17g} n={g.n}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_snapshot(path):
    """Read a field written by write_snapshot."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        parts = header.split()
        if parts[:2] != SNAPSHOT_MAGIC.split():
            raise ValueError(f"{path}: bad snapshot header {header!r}")
        kv = dict(item.split("=", 1) for item in parts[2:])
        grid = Grid(N=int(kv["N"]), L=float(kv["L"]), n=int(kv["n"]))
        raw = fh.read(8 * grid.size)
        if len(raw) != 8 * grid.size:
            raise ValueError(f"{path}: truncated snapshot payload")
        vals = np.frombuffer(raw, dtype="<f8").reshape(grid.shape)
    return Field(grid, vals)


def field_fingerprint(f):
    """Stable content hash of a field (header + payload bytes)."""
    import hashlib

    g = f.grid
    hsh = hashlib.sha256()
    hsh.update(f"{SNAPSHOT_MAGIC} N={g.N} L={g.L:.17g} n={g.n}\n".encode("ascii"))
    hsh.update(f.values.astype("<f8").tobytes(order="C"))
    return hsh.hexdigest()
