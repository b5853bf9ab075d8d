"""Field snapshot binary format.

Layout: magic bytes ``WCK1``, then little-endian u32 K, u32 M, u32 count,
followed by count * M * M little-endian 64-bit floats, row-major (real-grid
samples, one block per field).
"""

import struct

import numpy as np

from .errors import ConfigurationError
from .grid import RealField, SpectralField, TorusGrid, to_real

MAGIC = b"WCK1"
_HEADER = struct.Struct("<4sIII")


def write_snapshots(path, fields) -> None:
    fields = list(fields)
    if not fields:
        raise ConfigurationError("nothing to write")
    reals = [to_real(f) if isinstance(f, SpectralField) else f for f in fields]
    grid = reals[0].grid
    for f in reals:
        if f.grid != grid:
            raise ConfigurationError("snapshot fields live on different grids")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.K, grid.M, len(reals)))
        for f in reals:
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshots(path, grid: TorusGrid | None = None):
    """Read fields back; a grid with matching (K, M) may be supplied to reuse."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigurationError(f"{path}: truncated header")
        magic, K, M, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ConfigurationError(f"{path}: bad magic {magic!r}")
        if grid is None:
            grid = _grid_for(K, M)
        elif grid.K != K or grid.M != M:
            raise ConfigurationError(
                f"{path}: snapshot (K={K}, M={M}) does not match grid {grid!r}"
            )
        out = []
        for _ in range(count):
            buf = fh.read(8 * M * M)
            if len(buf) != 8 * M * M:
                raise ConfigurationError(f"{path}: truncated payload")
            out.append(RealField(grid, np.frombuffer(buf, dtype="<f8").reshape(M, M)))
    return out


def _grid_for(K: int, M: int) -> TorusGrid:
    # invert the grid-size rule: find the smallest max_degree reproducing M
    for d in range(1, 64):
        g = TorusGrid(K, max_degree=d)
        if g.M == M:
            return g
        if g.M > M:
            break
    raise ConfigurationError(f"no standard grid has K={K}, M={M}")
