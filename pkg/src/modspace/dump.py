"""Binary dump format for symbols and operator matrices.

Layout (all little-endian):

    8 bytes   magic b"MODSPACE"
    uint32    format version (1)
    uint32    kind: 1 dense symbol, 2 separable symbol, 3 dense operator
    uint32    n
    uint32    N (points per axis)
    float64   L (half length)
    uint32    byte length of the JSON metadata block
    ...       JSON metadata (utf-8)
    ...       complex128 payload, row-major

Dense symbols store the (N^n, N^n) array with x as the row index.
Separable symbols store each term as its x factor followed by its xi
factor. Operators store the (N^n, N^n) matrix.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, PreconditionError
from .quantize import OperatorMatrix
from .symbols import SymbolClassParams, SymbolGrid

__all__ = ["dump_symbol", "load_symbol", "dump_operator", "load_operator", "DumpFormatError"]

MAGIC = b"MODSPACE"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIdI")
_DT = np.dtype("<c16")


class DumpFormatError(ValueError):
    """The file is not a dump this version can read."""


def _write(path, kind: int, grid: Grid, meta: dict, arrays) -> None:
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, kind, grid.n, grid.N, grid.L, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=_DT).tobytes())


def _read(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DumpFormatError("file too short for a header")
    magic, version, kind, n, N, L, mlen = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DumpFormatError("bad magic")
    if version != VERSION:
        raise DumpFormatError(f"unsupported version {version}")
    off = _HEADER.size
    meta = json.loads(raw[off : off + mlen].decode())
    payload = np.frombuffer(raw, dtype=_DT, offset=off + mlen)
    return kind, Grid(n, N, L), meta, payload


def _params_meta(p: SymbolClassParams) -> dict:
    return {"m": p.m, "rho": p.rho, "delta": p.delta}


def dump_symbol(sigma: SymbolGrid, path) -> None:
    meta = {
        "params": _params_meta(sigma.params),
        "provenance": sigma.provenance,
        "piece": [sigma.piece[0], list(sigma.piece[1]), list(sigma.piece[2])] if sigma.piece else None,
        "info": sigma.info,
    }
    if sigma.is_separable:
        meta["terms"] = len(sigma.terms)
        arrays = [x for ab in sigma.terms for x in ab]
        _write(path, 2, sigma.grid, meta, arrays)
    else:
        _write(path, 1, sigma.grid, meta, [sigma.dense])


def load_symbol(path) -> SymbolGrid:
    kind, grid, meta, payload = _read(path)
    params = SymbolClassParams(**meta["params"])
    piece = meta.get("piece")
    if piece is not None:
        piece = (piece[0], tuple(piece[1]), tuple(piece[2]))
    common = dict(grid=grid, params=params, provenance=meta["provenance"], piece=piece, info=meta.get("info", {}))
    size = grid.size
    if kind == 1:
        if payload.size != size * size:
            raise DumpFormatError("dense symbol payload has the wrong length")
        return SymbolGrid(dense=payload.reshape(size, size).copy(), **common)
    if kind == 2:
        T = meta["terms"]
        if payload.size != 2 * T * size:
            raise DumpFormatError("separable symbol payload has the wrong length")
        chunks = payload.reshape(2 * T, size)
        terms = tuple((chunks[2 * t].copy(), chunks[2 * t + 1].copy()) for t in range(T))
        return SymbolGrid(terms=terms, **common)
    raise DumpFormatError(f"kind {kind} is not a symbol")


def dump_operator(A: OperatorMatrix, path) -> None:
    if not A.is_dense:
        raise PreconditionError("only dense operators are dumped; dump the symbol instead")
    _write(path, 3, A.grid, {"provenance": A.symbol_provenance}, [A.entries])


def load_operator(path) -> OperatorMatrix:
    kind, grid, meta, payload = _read(path)
    if kind != 3:
        raise DumpFormatError(f"kind {kind} is not an operator")
    if payload.size != grid.size**2:
        raise DumpFormatError("operator payload has the wrong length")
    return OperatorMatrix(grid, payload.reshape(grid.size, grid.size).copy(), meta["provenance"])
