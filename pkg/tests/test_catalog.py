import json
import logging
from datetime import datetime, timezone

import numpy as np
import pytest

from gridlight.catalog import (
    Catalog,
    decode_time,
    encode_time,
    format_timestamp,
    parse_column_spec,
    parse_time_units,
    parse_timestamp,
    read_tabular,
)
from gridlight.errors import (
    ArityMismatch,
    EmptyFileList,
    ParseFailure,
    SchemaMismatch,
    UnknownDataset,
    UnknownSpanningDim,
    UnparsableUnits,
)
from gridlight.fixtures import generate_fixture
from gridlight.gridfile import open_grid_file
from gridlight.rewrite import rewrite_global, TRUE


def test_time_units_round_trip():
    units = parse_time_units("hours since 1900-01-01 00:00:00.0")
    ts = datetime(2017, 1, 1, 6, tzinfo=timezone.utc)
    raw = encode_time(ts, units)
    assert raw == (117 * 365 + 29) * 24 + 6  # 29 leap days in 1900..2016
    assert decode_time(raw, units) == ts
    assert decode_time(3, "days since 2000-01-01") == datetime(2000, 1, 4, tzinfo=timezone.utc)


def test_unparsable_units():
    with pytest.raises(UnparsableUnits):
        parse_time_units("fortnights since tuesday")


def test_timestamp_text():
    p = parse_timestamp("2017-01-01 02:00:00")
    assert p == 1483236000.0
    assert format_timestamp(p) == "2017-01-01 02:00:00"
    assert parse_timestamp("2017-01-01T02:00:00Z") == p


def test_register_grid_schema(era24):
    cat = Catalog()
    desc = cat.register_grid_dataset("era", era24, ["time"])
    assert desc.schema.dim_names == ["time", "lat", "lon"]
    assert desc.schema.var_names == ["t", "cc", "q", "o3", "u", "v"]
    assert desc.row_schema.names == ["file", "time", "lat", "latPos", "lon", "lonPos",
                                     "t", "cc", "q", "o3", "u", "v"]
    assert desc.row_schema.get("time").type == "timestamp"
    assert str(desc.schema.time_units["time"]) == "hours since 2017-01-01 00:00:00"


def test_register_errors(era24):
    cat = Catalog()
    with pytest.raises(EmptyFileList):
        cat.register_grid_dataset("x", [])
    with pytest.raises(UnknownSpanningDim):
        cat.register_grid_dataset("x", era24, ["level"])
    with pytest.raises(UnknownDataset):
        cat.get("x")


def test_reregister_warns(era24, caplog):
    cat = Catalog()
    cat.register_grid_dataset("era", era24[:2], ["time"])
    with caplog.at_level(logging.WARNING):
        cat.register_grid_dataset("era", era24, ["time"])
    assert "replacing" in caplog.text
    assert len(cat.get("era").files) == 24


def test_schema_mismatch_deferred(tmp_path, era24):
    other = generate_fixture(tmp_path, "time:1,lat:10,lon:144", 1, "t")
    cat = Catalog()
    desc = cat.register_grid_dataset("mixed", [era24[0], other[0]], ["time"])
    with pytest.raises(SchemaMismatch) as err:
        desc.validate_file(open_grid_file(other[0]))
    assert err.value.file == other[0]
    # the global rewrite reads only the first file, so it still succeeds
    assert rewrite_global(TRUE, desc).clauses


def test_tabular_parsing(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time,lat,val\n2017-01-01 00:00:00,1.5,2\n\n2017-01-01 01:00:00,2.5,3\n")
    cat = Catalog()
    desc = cat.register_tabular_dataset("t", [p], parse_column_spec("time:timestamp,lat:f64,val:i64"))
    data = read_tabular(desc, str(p))
    np.testing.assert_array_equal(data["lat"], [1.5, 2.5])
    assert data["val"].dtype == np.int64
    assert data["time"][1] - data["time"][0] == 3600.0


def test_tabular_errors(tmp_path):
    cat = Catalog()
    p = tmp_path / "t.csv"
    desc = cat.register_tabular_dataset("t", [p], [("a", "f64"), ("b", "f64")])
    p.write_text("1,2\n3\n")
    with pytest.raises(ArityMismatch) as err:
        read_tabular(desc, str(p))
    assert err.value.line == 2
    p.write_text("1,x\n")
    with pytest.raises(ParseFailure):
        read_tabular(desc, str(p))


def test_manifest_round_trip(tmp_path, era24, subbox_csv):
    path = tmp_path / "m.json"
    cat = Catalog(path)
    cat.register_grid_dataset("era", era24, ["time"])
    cat.register_tabular_dataset("nao", [subbox_csv], parse_column_spec("time:timestamp,lat:f64,lon:f64,val:f64"),
                                 delimiter=",")
    cat.save()
    data = json.loads(path.read_text())
    assert [d["name"] for d in data["datasets"]] == ["era", "nao"]
    again = Catalog.load(path)
    assert again.get("era").row_schema == cat.get("era").row_schema
    assert again.get("nao").schema.columns == cat.get("nao").schema.columns


def test_parse_column_spec():
    assert parse_column_spec("time:timestamp, lat:f64,x") == [("time", "timestamp"), ("lat", "f64"), ("x", "f64")]
