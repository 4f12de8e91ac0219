import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlight.blockcover import Block
from gridlight.errors import (
    BadMagic,
    InvalidSchema,
    NonMonotonicAxis,
    NoCoordinateVariable,
    OutOfBounds,
    TruncatedHeader,
    UnknownVariable,
    UnsupportedFeature,
)
from gridlight.gridfile import (
    CoordinateAxis,
    Dimension,
    FileSchema,
    IoCounter,
    Variable,
    open_grid_file,
    read_axis,
    read_subarray,
    read_variable,
    write_grid_file,
)

netcdf = pytest.importorskip("scipy.io").netcdf_file


def simple_schema(dtype="f32"):
    dims = (Dimension("time", 2), Dimension("lat", 3), Dimension("lon", 4))
    variables = (
        Variable("time", "f64", ("time",), {"units": "hours since 2017-01-01 00:00:00"}),
        Variable("lat", "f64", ("lat",)),
        Variable("lon", "f64", ("lon",)),
        Variable("sp", dtype, ("time", "lat", "lon"), {"scale": 2.5, "long_name": "surface pressure"}),
    )
    return FileSchema(dims, variables, {"title": "t"})


def write_simple(path, dtype="f32", version=1):
    axes = {"time": [0.0, 1.0], "lat": [10.0, 0.0, -10.0], "lon": [0.0, 90.0, 180.0, 270.0]}
    fill = {"sp": lambda t, la, lo: 1000 * t + la + lo / 10}
    write_grid_file(path, simple_schema(dtype), axes, fill, version)
    return path


def test_header_round_trip(tmp_path):
    h = open_grid_file(write_simple(tmp_path / "a.nc"))
    assert h.version == 1
    assert [d.name for d in h.header.dimensions] == ["time", "lat", "lon"]
    sp = h.header.variable("sp")
    assert sp.dims == ("time", "lat", "lon")
    assert sp.attributes == {"scale": 2.5, "long_name": "surface pressure"}
    assert h.header.attributes["title"] == "t"
    assert h.shape("sp") == (2, 3, 4)


def test_values_match_fill(tmp_path):
    h = open_grid_file(write_simple(tmp_path / "a.nc", "f64"))
    data = read_variable(h, "sp")
    t, la, lo = np.meshgrid([0.0, 1.0], [10.0, 0.0, -10.0], [0.0, 90.0, 180.0, 270.0], indexing="ij")
    np.testing.assert_array_equal(data, 1000 * t + la + lo / 10)


def test_scipy_reads_what_we_write(tmp_path):
    path = write_simple(tmp_path / "a.nc", "i16", version=2)
    with netcdf(str(path), "r", mmap=False) as f:
        ours = read_variable(open_grid_file(path), "sp")
        np.testing.assert_array_equal(f.variables["sp"][:], ours)
        assert f.variables["time"].units == b"hours since 2017-01-01 00:00:00"
        assert f.version_byte == 2


def _scipy_file(path, with_record=True):
    with netcdf(str(path), "w") as f:
        f.title = b"scipy"
        if with_record:
            f.createDimension("time", None)
        else:
            f.createDimension("time", 3)
        f.createDimension("lat", 5)
        f.createDimension("lon", 7)
        t = f.createVariable("time", "f8", ("time",))
        t.units = b"hours since 2017-01-01 00:00:00"
        f.createVariable("lat", "f8", ("lat",))[:] = np.linspace(40, 0, 5)
        f.createVariable("lon", "f4", ("lon",))[:] = np.arange(7, dtype="f4")
        a = f.createVariable("a", "i2", ("time", "lat", "lon"))
        b = f.createVariable("b", "f4", ("time", "lat", "lon"))
        c = f.createVariable("c", "b", ("time",))
        t[:3] = [0, 1, 2]
        a[:3] = np.arange(105, dtype="i2").reshape(3, 5, 7)
        b[:3] = np.arange(105, dtype="f4").reshape(3, 5, 7) / 4
        c[:3] = [1, -2, 3]


@pytest.mark.parametrize("with_record", [True, False])
def test_reads_scipy_files(tmp_path, with_record):
    path = tmp_path / "s.nc"
    _scipy_file(path, with_record)
    h = open_grid_file(path)
    assert h.dim_length("time") == 3
    assert h.is_record_variable("a") == with_record
    np.testing.assert_array_equal(read_variable(h, "a"), np.arange(105).reshape(3, 5, 7))
    np.testing.assert_array_equal(read_variable(h, "b"), np.arange(105, dtype="f4").reshape(3, 5, 7) / 4)
    np.testing.assert_array_equal(read_variable(h, "c"), [1, -2, 3])
    sub = read_subarray(h, "b", Block(("time", "lat", "lon"), (1, 2, 3), (2, 3, 6)))
    np.testing.assert_array_equal(sub, (np.arange(105, dtype="f4").reshape(3, 5, 7) / 4)[1:3, 2:4, 3:7])
    assert read_axis(h, "lat").direction == "descending"


def test_single_record_variable_has_no_padding(tmp_path):
    path = tmp_path / "r.nc"
    with netcdf(str(path), "w") as f:
        f.createDimension("time", None)
        v = f.createVariable("x", "i2", ("time",))
        v[:5] = [1, 2, 3, 4, 5]
    np.testing.assert_array_equal(read_variable(open_grid_file(path), "x"), [1, 2, 3, 4, 5])


def test_subarray_counts_exact_bytes(tmp_path):
    h = open_grid_file(write_simple(tmp_path / "a.nc", "f32"))
    counter = IoCounter()
    block = Block(("time", "lat", "lon"), (0, 1, 0), (1, 2, 3))
    data = read_subarray(h, "sp", block, counter)
    assert data.shape == (2, 2, 4)
    assert counter.bytes_read == 2 * 2 * 4 * 4
    assert counter.by_variable == {"sp": 64}


def test_subarray_out_of_bounds(tmp_path):
    h = open_grid_file(write_simple(tmp_path / "a.nc"))
    with pytest.raises(OutOfBounds):
        read_subarray(h, "sp", Block(("time", "lat", "lon"), (0, 0, 0), (0, 3, 0)))
    with pytest.raises(UnknownVariable):
        read_variable(h, "nope")


def test_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "x.nc"
    p.write_bytes(b"HDF\x01" + b"\0" * 20)
    with pytest.raises(BadMagic):
        open_grid_file(p)
    p.write_bytes(b"CDF\x05" + b"\0" * 40)
    with pytest.raises(UnsupportedFeature):
        open_grid_file(p)
    good = write_simple(tmp_path / "a.nc").read_bytes()
    p.write_bytes(good[:30])
    with pytest.raises(TruncatedHeader):
        open_grid_file(p)


def test_streaming_numrecs(tmp_path):
    path = tmp_path / "s.nc"
    _scipy_file(path, with_record=True)
    raw = bytearray(path.read_bytes())
    raw[4:8] = struct.pack(">I", 0xFFFFFFFF)
    path.write_bytes(bytes(raw))
    h = open_grid_file(path)
    assert h.numrec == 3
    np.testing.assert_array_equal(read_variable(h, "c"), [1, -2, 3])


def test_axis_requires_coordinate_and_monotonic(tmp_path):
    schema = FileSchema((Dimension("x", 3),), (Variable("v", "f64", ("x",)),))
    path = tmp_path / "n.nc"
    write_grid_file(path, schema, fill={"v": lambda x: x})
    with pytest.raises(NoCoordinateVariable):
        read_axis(open_grid_file(path), "x")
    with pytest.raises(NonMonotonicAxis):
        CoordinateAxis.from_values("x", [0.0, 2.0, 1.0])


def test_writer_rejects_bad_schema(tmp_path):
    with pytest.raises(InvalidSchema):
        write_grid_file(tmp_path / "a.nc", FileSchema((Dimension("x", 2),), (Variable("v", "f64", ("y",)),)),
                        fill={"v": lambda y: y})
    with pytest.raises(InvalidSchema):
        write_grid_file(tmp_path / "a.nc", FileSchema((Dimension("x", 2),), (Variable("v", "f64", ("x",)),)))


DTYPES = ["i8", "i16", "i32", "f32", "f64"]


@st.composite
def schemas(draw):
    ndims = draw(st.integers(1, 3))
    dims = tuple(Dimension(f"d{i}", draw(st.integers(1, 5))) for i in range(ndims))
    nvars = draw(st.integers(1, 3))
    variables = []
    for k in range(nvars):
        rank = draw(st.integers(1, ndims))
        vd = tuple(d.name for d in dims[:rank])
        variables.append(Variable(f"v{k}", draw(st.sampled_from(DTYPES)), vd))
    return FileSchema(dims, tuple(variables))


@settings(max_examples=40, deadline=None)
@given(schemas(), st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_random_schema_round_trip(tmp_path_factory, schema, seed, version):
    rng = np.random.default_rng(seed)
    path = tmp_path_factory.mktemp("rt") / "r.nc"
    expected = {}
    for v in schema.variables:
        shape = tuple(schema.dimension(d).length for d in v.dims)
        expected[v.name] = rng.integers(-100, 100, size=shape).astype(np.float64)
    fill = {name: (lambda *c, a=arr: a) for name, arr in expected.items()}
    write_grid_file(path, schema, fill=fill, version=version)
    h = open_grid_file(path)
    assert h.header.dimensions == schema.dimensions
    for v in schema.variables:
        np.testing.assert_array_equal(read_variable(h, v.name), expected[v.name])
    with netcdf(str(path), "r", mmap=False) as f:
        for v in schema.variables:
            np.testing.assert_array_equal(f.variables[v.name][:], expected[v.name])


def test_fill_example_and_block_slice(tmp_path):
    lat = [10.0, 7.5, 5.0, 2.5, 0.0]
    lon = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25]
    schema = FileSchema(
        (Dimension("time", 1), Dimension("lat", 5), Dimension("lon", 6)),
        (Variable("time", "f64", ("time",)), Variable("lat", "f64", ("lat",)), Variable("lon", "f64", ("lon",)),
         Variable("sp", "f64", ("time", "lat", "lon"))),
    )
    path = tmp_path / "f.nc"
    write_grid_file(path, schema, {"time": [0.0], "lat": lat, "lon": lon}, {"sp": lambda t, la, lo: la * 1000 + lo})
    h = open_grid_file(path)
    full = read_variable(h, "sp")
    assert full[0, 2, 3] == 5 * 1000 + 0.75 == 5000.75
    part = read_subarray(h, "sp", Block(("time", "lat", "lon"), (0, 1, 2), (0, 3, 4)))
    assert part.shape == (1, 3, 3)
    np.testing.assert_array_equal(part, full[0:1, 1:4, 2:5])
