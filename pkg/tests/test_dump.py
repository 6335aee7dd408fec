import numpy as np
import pytest

from modspace import Grid, PreconditionError
from modspace.dump import DumpFormatError, dump_operator, dump_symbol, load_operator, load_symbol
from modspace.quantize import quantize
from modspace.symbols import SymbolClassParams, bessel_symbol, custom_symbol


@pytest.fixture
def grid():
    return Grid(1, 32, 4.0)


def test_separable_symbol_round_trip(tmp_path, grid):
    sigma = bessel_symbol(0.5, grid)
    dump_symbol(sigma, tmp_path / "s.bin")
    back = load_symbol(tmp_path / "s.bin")
    assert back.is_separable and back.params == sigma.params
    assert np.array_equal(back.values, sigma.values)


def test_dense_symbol_round_trip(tmp_path, grid):
    sigma = custom_symbol(grid, lambda xs, xis: np.cos(xs[0]) * xis[0] + 1j, SymbolClassParams(1.0, 1.0, 0.0))
    dump_symbol(sigma, tmp_path / "d.bin")
    back = load_symbol(tmp_path / "d.bin")
    assert np.array_equal(back.values, sigma.values)
    assert back.grid == grid


def test_operator_round_trip(tmp_path, grid):
    A = quantize(bessel_symbol(1.0, grid), matrix_free=False)
    dump_operator(A, tmp_path / "a.bin")
    assert np.array_equal(load_operator(tmp_path / "a.bin").dense(), A.dense())
    with pytest.raises(PreconditionError):
        dump_operator(quantize(bessel_symbol(1.0, grid), matrix_free=True), tmp_path / "mf.bin")


def test_rejects_foreign_files(tmp_path, grid):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTADUMP" + bytes(40))
    with pytest.raises(DumpFormatError, match="magic"):
        load_symbol(bad)
    bad.write_bytes(b"MOD")
    with pytest.raises(DumpFormatError):
        load_operator(bad)
    dump_symbol(bessel_symbol(1.0, grid), tmp_path / "s.bin")
    with pytest.raises(DumpFormatError, match="not an operator"):
        load_operator(tmp_path / "s.bin")
