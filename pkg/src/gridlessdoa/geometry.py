"""Sensor geometries, difference coarrays, and the structured-matrix mapping.

A linear array is a strictly increasing list of sensor positions in units of
the half-wavelength grid, with the first sensor pinned at 0.  On-grid arrays
(integer positions) have a difference coarray: the set of pairwise position
differences, which determines which correlation lags the array observes.

The central object is the linear map from a lag vector ``v`` (one complex
entry per nonnegative lag up to the aperture) to the Hermitian sensor-domain
covariance ``T(v)`` with ``T(v)[i, j] = v[|p_i - p_j|]`` on the upper
triangle and conjugates below.  ``T(v)`` is the principal submatrix of the
full Hermitian Toeplitz embedding ``Toep(v)`` at the sensor positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_GRID_TOL = 1e-9


class GeometryError(Exception):
    pass


@dataclass(frozen=True)
class ArrayGeometry:
    """Sensor positions in units of d = half wavelength.

    Positions must be strictly increasing, nonnegative, and start at 0.
    ``on_grid`` is true when every position is an integer, in which case the
    coarray machinery applies.
    """

    positions: tuple[float, ...]
    on_grid: bool = field(init=False)

    def __post_init__(self) -> None:
        pos = tuple(float(p) for p in self.positions)
        if len(pos) == 0:
            raise GeometryError("geometry needs at least one sensor")
        if abs(pos[0]) > _GRID_TOL:
            raise GeometryError("first sensor position must be 0")
        if any(b - a <= 0 for a, b in zip(pos, pos[1:])):
            raise GeometryError("positions must be strictly increasing")
        object.__setattr__(self, "positions", pos)
        on_grid = all(abs(p - round(p)) <= _GRID_TOL for p in pos)
        object.__setattr__(self, "on_grid", on_grid)

    @classmethod
    def parse(cls, text: str) -> "ArrayGeometry":
        """Parse the config literal form, e.g. ``"0,1,2,3,7,11"``."""
        return cls(tuple(float(tok) for tok in text.split(",") if tok.strip()))

    @classmethod
    def ula(cls, m: int) -> "ArrayGeometry":
        return cls(tuple(float(i) for i in range(m)))

    @property
    def m(self) -> int:
        return len(self.positions)

    def grid_positions(self) -> tuple[int, ...]:
        if not self.on_grid:
            raise GeometryError("geometry is not on the integer grid")
        return tuple(int(round(p)) for p in self.positions)


@dataclass(frozen=True)
class LagStructure:
    """Difference coarray of an on-grid geometry."""

    lags: tuple[int, ...]            # full symmetric coarray, sorted
    nonneg: tuple[int, ...]          # nonnegative part, sorted
    aperture: int                    # max lag + 1
    contiguous: int                  # smallest missing nonnegative lag
    holes: tuple[int, ...]           # missing lags in {0, ..., aperture-1}


def coarray(g: ArrayGeometry) -> LagStructure:
    """Difference coarray of an on-grid geometry."""
    pos = g.grid_positions()
    diffs = sorted({a - b for a in pos for b in pos})
    nonneg = tuple(d for d in diffs if d >= 0)
    aperture = nonneg[-1] + 1
    present = set(nonneg)
    holes = tuple(k for k in range(aperture) if k not in present)
    contiguous = aperture if not holes else holes[0]
    return LagStructure(
        lags=tuple(diffs),
        nonneg=nonneg,
        aperture=aperture,
        contiguous=contiguous,
        holes=holes,
    )


@lru_cache(maxsize=None)
def _lag_index(positions: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry |p_i - p_j| index matrix and the conjugation mask (i > j)."""
    p = np.asarray(positions, dtype=np.int64)
    idx = np.abs(p[:, None] - p[None, :])
    conj = p[:, None] > p[None, :]
    return idx, conj


def structured_matrix(v: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """Realize the lag vector as the M x M structured Hermitian matrix T(v)."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    lag = coarray(g)
    if v.size != lag.aperture:
        raise GeometryError(f"lag vector length {v.size} != aperture {lag.aperture}")
    idx, conj = _lag_index(g.grid_positions())
    out = v[idx]
    out[conj] = np.conj(out[conj])
    return out


def toeplitz_embed(v: np.ndarray) -> np.ndarray:
    """Hermitian Toeplitz matrix with first row v."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    n = v.size
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    out = v[idx]
    lower = np.tril_indices(n, k=-1)
    out[lower] = np.conj(out[lower])
    return out


@lru_cache(maxsize=None)
def _lag_pairs(positions: tuple[int, ...]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Upper-triangle index pairs (i, j), j > i, grouped by lag p_j - p_i."""
    p = positions
    groups: dict[int, list[tuple[int, int]]] = {}
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            groups.setdefault(p[j] - p[i], []).append((i, j))
    return {
        lag: (np.array([ij[0] for ij in pairs]), np.array([ij[1] for ij in pairs]))
        for lag, pairs in groups.items()
    }


def adjoint_structured(a: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """Adjoint of the map v -> T(v) under the real trace inner product.

    For Hermitian A, ``Re tr(A T(v)) == Re <v, adjoint(A)>`` holds for every
    lag vector v, with ``<x, y> = sum conj(x) * y``.
    """
    a = np.asarray(a, dtype=np.complex128)
    lag = coarray(g)
    if a.shape != (g.m, g.m):
        raise GeometryError(f"matrix shape {a.shape} does not match geometry size {g.m}")
    out = np.zeros(lag.aperture, dtype=np.complex128)
    out[0] = np.trace(a).real
    for m, (ii, jj) in _lag_pairs(g.grid_positions()).items():
        if m:
            out[m] = 2.0 * a[ii, jj].sum()
    return out


def extract_lags(a: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """Read the lag vector back out of a structured matrix.

    Only defined for hole-free coarrays (the map is invertible there); each
    lag is read from one representative upper-triangle entry.
    """
    lag = coarray(g)
    if lag.holes:
        raise GeometryError("lag extraction undefined: coarray has holes")
    a = np.asarray(a, dtype=np.complex128)
    pairs = _lag_pairs(g.grid_positions())
    out = np.zeros(lag.aperture, dtype=np.complex128)
    out[0] = np.mean(np.diag(a)).real
    for m in range(1, lag.aperture):
        ii, jj = pairs[m]
        out[m] = a[ii[0], jj[0]]
    return out


def nested_two_level(s1: int, s2: int) -> tuple[int, ...]:
    """Two-level nested array positions {0..s1-1} U {s1 + i(s1+1)}, aperture (s1+1)s2."""
    first = list(range(s1))
    second = [s1 + i * (s1 + 1) for i in range(s2)]
    return tuple(sorted(set(first + second)))


def nested_completion(g: ArrayGeometry) -> tuple[int, ...]:
    """Missing sensor positions that complete ``g`` to a hole-free geometry.

    Candidate completions are two-level nested arrays whose aperture matches
    the aperture of ``g``; among all factorizations (s1+1)*s2 == aperture the
    one minimizing the number of added sensors wins, ties broken by smaller
    s1.  Falls back to completing to the full ULA when no factorization
    exists.
    """
    pos = set(g.grid_positions())
    aperture = coarray(g).aperture
    best: tuple[int, int, tuple[int, ...]] | None = None
    for s1 in range(1, aperture):
        if aperture % (s1 + 1):
            continue
        s2 = aperture // (s1 + 1)
        if s2 < 1:
            continue
        missing = tuple(sorted(set(nested_two_level(s1, s2)) - pos))
        key = (len(missing), s1)
        if best is None or key < (best[0], best[1]):
            best = (len(missing), s1, missing)
    if best is None:
        return tuple(sorted(set(range(aperture)) - pos))
    return best[2]
