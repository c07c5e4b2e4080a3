"""
Tests for field dumps and report files.
"""
import math
from pathlib import Path

import numpy as np
import pytest

from slabvortex.serializer import CorruptDumpError, FieldSerializer, ReportSerializer


@pytest.fixture
def director(slab_grid, hedgehog, make_random_director):
    return make_random_director(slab_grid, hedgehog, seed=3)


@pytest.fixture
def dump(tmp_path, director, params):
    path = tmp_path / "field.dump"
    FieldSerializer.save(director, path, params, degree=1, rotation=0.25, config_hash="abc123def456")
    return path


class TestFieldSerializer:
    """Tests for FieldSerializer."""

    def test_lossless(self, dump, director, params):
        """Values and header survive a save/load cycle exactly."""
        loaded, header = FieldSerializer.load(dump)
        assert np.array_equal(loaded.values, director.values)
        assert loaded.grid.node_shape == director.grid.node_shape
        assert header.params == params
        assert header.degree == 1
        assert header.rotation == 0.25
        assert header.config_hash == "abc123def456"

    def test_deterministic_bytes(self, tmp_path, dump, director, params):
        """Saving the same field twice gives identical files."""
        again = tmp_path / "again.dump"
        FieldSerializer.save(director, again, params, degree=1, rotation=0.25, config_hash="abc123def456")
        assert again.read_bytes() == dump.read_bytes()

    def test_without_params(self, tmp_path, director):
        """A dump without parameters has params None."""
        path = tmp_path / "bare.dump"
        FieldSerializer.save(director, path)
        _, header = FieldSerializer.load(path)
        assert header.eps is None
        assert header.params is None

    def test_bad_magic(self, tmp_path, dump):
        """A wrong first line is reported at offset 0."""
        data = bytearray(dump.read_bytes())
        data[0:1] = b"X"
        path = tmp_path / "magic.dump"
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptDumpError) as info:
            FieldSerializer.load(path)
        assert info.value.offset == 0

    def test_truncated(self, tmp_path, dump):
        """A short payload is reported at the end of the available bytes."""
        data = dump.read_bytes()[:-10]
        path = tmp_path / "short.dump"
        path.write_bytes(data)
        with pytest.raises(CorruptDumpError, match="truncated") as info:
            FieldSerializer.load(path)
        assert info.value.offset == len(data)

    def test_trailing_bytes(self, tmp_path, dump):
        """Extra bytes are reported where the payload should have ended."""
        data = dump.read_bytes()
        path = tmp_path / "long.dump"
        path.write_bytes(data + b"\x00\x01")
        with pytest.raises(CorruptDumpError, match="trailing") as info:
            FieldSerializer.load(path)
        assert info.value.offset == len(data)

    def test_nan_payload(self, tmp_path, dump):
        """A NaN is reported at its own byte offset."""
        data = bytearray(dump.read_bytes())
        _, start = FieldSerializer.read_header(bytes(data))
        data[start + 40:start + 48] = np.array([math.nan], dtype="<f8").tobytes()
        path = tmp_path / "nan.dump"
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptDumpError, match="non-finite") as info:
            FieldSerializer.load(path)
        assert info.value.offset == start + 40

    def test_unterminated_header(self, tmp_path):
        """A file that ends inside the header is corrupt."""
        path = tmp_path / "header.dump"
        path.write_bytes(b"SLABVORTEX")
        with pytest.raises(CorruptDumpError):
            FieldSerializer.load(path)


class TestReportSerializer:
    """Tests for CSV and JSON reports."""

    def test_csv_provenance(self, tmp_path, params):
        """The first line records schema, hash and parameters."""
        path = ReportSerializer.write_csv(
            tmp_path / "energy.csv",
            [{"eps": 0.2, "total": 1.5, "converged": True, "note": None}],
            ["eps", "total", "converged", "note"],
            config_hash="abc123def456",
            params=params,
        )
        provenance, rows = ReportSerializer.read_csv(path)
        assert provenance["config_hash"] == "abc123def456"
        assert float(provenance["eps"]) == params.eps
        assert float(provenance["k"]) == pytest.approx(params.k)
        assert rows == [{"eps": "0.2", "total": "1.5", "converged": "true", "note": ""}]

    def test_csv_without_params(self):
        """Missing provenance values are written as '-'."""
        text = ReportSerializer.csv_text([], ["a"])
        assert text.splitlines()[0].endswith("config_hash=- eps=- eta=- k=-")
        assert text.splitlines()[1] == "a"

    def test_read_csv_requires_provenance(self, tmp_path):
        """Tables without a provenance line are rejected."""
        path = tmp_path / "plain.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="provenance"):
            ReportSerializer.read_csv(path)

    def test_json_values(self, tmp_path):
        """Non-finite floats become null; numpy and paths become plain JSON."""
        path = ReportSerializer.write_json(
            tmp_path / "report.json",
            {"spread": math.inf, "gamma": np.float64(1.5), "counts": np.arange(3), "out": Path("runs/a"),
             "ok": np.bool_(True)},
        )
        assert ReportSerializer.read_json(path) == {
            "spread": None, "gamma": 1.5, "counts": [0, 1, 2], "out": "runs/a", "ok": True,
        }
