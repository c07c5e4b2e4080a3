"""
Serialization of director fields and experiment reports.

Field dumps are a text header of `key: value` lines closed by END_HEADER,
followed by the little-endian float64 payload with x varying fastest, then y,
then z, three components per node. Reports are CSV tables with a provenance
comment line, and JSON documents. Nothing written here carries a timestamp,
so identical runs produce identical bytes.
"""
import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from slabvortex.constants import FIELD_DUMP_END, FIELD_DUMP_MAGIC, FIELD_DUMP_ORDER, SCHEMA_VERSION
from slabvortex.domain import Grid3D, extrude, make_domain, shape_from_dims
from slabvortex.fields import DirectorField
from slabvortex.params import ScalingParams

logger = logging.getLogger(__name__)


class CorruptDumpError(ValueError):
    """Raised when a field dump cannot be parsed; offset is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


@dataclass(frozen=True)
class FieldDumpHeader:
    """Metadata stored in front of a field dump payload."""
    schema_version: str
    domain_kind: str
    domain_dims: dict
    resolution: tuple[int, int]
    nodes: tuple[int, int, int]
    spacing: tuple[float, float, float]
    eps: Optional[float]
    eta: Optional[float]
    degree: int
    rotation: float
    config_hash: str
    payload_bytes: int

    @property
    def params(self) -> Optional[ScalingParams]:
        if self.eps is None or self.eta is None:
            return None
        return ScalingParams(eps=self.eps, eta=self.eta)

    def to_lines(self) -> list[str]:
        return [
            FIELD_DUMP_MAGIC,
            f"schema_version: {self.schema_version}",
            f"domain_kind: {self.domain_kind}",
            f"domain_dims: {json.dumps(self.domain_dims, sort_keys=True)}",
            f"resolution: {self.resolution[0]} {self.resolution[1]}",
            f"nodes: {' '.join(str(n) for n in self.nodes)}",
            f"spacing: {' '.join(repr(float(s)) for s in self.spacing)}",
            f"eps: {repr(self.eps) if self.eps is not None else '-'}",
            f"eta: {repr(self.eta) if self.eta is not None else '-'}",
            f"degree: {self.degree}",
            f"rotation: {self.rotation!r}",
            f"config_hash: {self.config_hash}",
            f"order: {FIELD_DUMP_ORDER}",
            f"payload_bytes: {self.payload_bytes}",
            FIELD_DUMP_END,
        ]


def _optional_float(text: str) -> Optional[float]:
    return None if text == "-" else float(text)


class FieldSerializer:
    """Save and load DirectorField dumps."""

    @staticmethod
    def save(
        field: DirectorField,
        filepath: Path,
        params: Optional[ScalingParams] = None,
        degree: int = 0,
        rotation: float = 0.0,
        config_hash: str = "",
    ) -> FieldDumpHeader:
        """
        Write a field dump.

        Args:
            field: Director field to store
            filepath: Destination file
            params: Scaling parameters recorded in the header
            degree: Degree of the lateral datum
            rotation: Rotation of the lateral datum
            config_hash: Hash of the run configuration
        """
        grid = field.grid
        domain = grid.base
        payload = np.ascontiguousarray(np.transpose(field.values, (2, 1, 0, 3)), dtype="<f8").tobytes()
        header = FieldDumpHeader(
            schema_version=SCHEMA_VERSION,
            domain_kind=domain.kind.value,
            domain_dims=domain.shape.dims,
            resolution=(domain.nx, domain.ny),
            nodes=grid.node_shape,
            spacing=grid.spacing,
            eps=params.eps if params else None,
            eta=params.eta if params else None,
            degree=int(degree),
            rotation=float(rotation),
            config_hash=config_hash,
            payload_bytes=len(payload),
        )
        filepath = Path(filepath)
        with filepath.open("wb") as f:
            f.write(("\n".join(header.to_lines()) + "\n").encode("ascii"))
            f.write(payload)
        logger.debug("Wrote %s (%d payload bytes)", filepath, len(payload))
        return header

    @staticmethod
    def read_header(data: bytes) -> tuple[FieldDumpHeader, int]:
        """Parse the header; returns it with the byte offset where the payload starts."""
        offset = 0
        entries: dict[str, tuple[str, int]] = {}
        first = True
        while True:
            end = data.find(b"\n", offset)
            if end < 0:
                raise CorruptDumpError(f"header is not terminated by {FIELD_DUMP_END}", len(data))
            try:
                line = data[offset:end].decode("ascii")
            except UnicodeDecodeError:
                raise CorruptDumpError("header contains non-ASCII bytes", offset) from None
            if first:
                if line != FIELD_DUMP_MAGIC:
                    raise CorruptDumpError(f"not a field dump: expected {FIELD_DUMP_MAGIC!r}", offset)
                first = False
            elif line == FIELD_DUMP_END:
                offset = end + 1
                break
            else:
                key, sep, value = line.partition(": ")
                if not sep:
                    raise CorruptDumpError(f"malformed header line {line!r}", offset)
                entries[key] = (value, offset)
            offset = end + 1

        def field(key: str):
            if key not in entries:
                raise CorruptDumpError(f"header lacks {key!r}", offset)
            return entries[key]

        try:
            version = field("schema_version")[0]
            if version != SCHEMA_VERSION:
                raise CorruptDumpError(f"unsupported schema version {version!r}", field("schema_version")[1])
            order = field("order")[0]
            if order != FIELD_DUMP_ORDER:
                raise CorruptDumpError(f"unsupported payload order {order!r}", field("order")[1])
            header = FieldDumpHeader(
                schema_version=version,
                domain_kind=field("domain_kind")[0],
                domain_dims=json.loads(field("domain_dims")[0]),
                resolution=tuple(int(v) for v in field("resolution")[0].split()),
                nodes=tuple(int(v) for v in field("nodes")[0].split()),
                spacing=tuple(float(v) for v in field("spacing")[0].split()),
                eps=_optional_float(field("eps")[0]),
                eta=_optional_float(field("eta")[0]),
                degree=int(field("degree")[0]),
                rotation=float(entries.get("rotation", ("0.0", 0))[0]),
                config_hash=field("config_hash")[0],
                payload_bytes=int(field("payload_bytes")[0]),
            )
        except (ValueError, json.JSONDecodeError) as e:
            if isinstance(e, CorruptDumpError):
                raise
            raise CorruptDumpError(f"unparsable header value: {e}", offset) from e
        if len(header.nodes) != 3 or len(header.resolution) != 2 or len(header.spacing) != 3:
            raise CorruptDumpError("header dimensions have the wrong arity", offset)
        return header, offset

    @staticmethod
    def load(filepath: Path) -> tuple[DirectorField, FieldDumpHeader]:
        """
        Load a field dump and rebuild its grid.

        Raises:
            CorruptDumpError: For a bad header, a truncated or oversized payload,
                a grid that does not match the header, or non-finite values
        """
        filepath = Path(filepath)
        data = filepath.read_bytes()
        header, start = FieldSerializer.read_header(data)

        Nx, Ny, Nz = header.nodes
        expected = Nx * Ny * Nz * 3 * 8
        if header.payload_bytes != expected:
            raise CorruptDumpError(
                f"payload_bytes {header.payload_bytes} does not match {Nx}x{Ny}x{Nz} nodes", start
            )
        available = len(data) - start
        if available < expected:
            raise CorruptDumpError(
                f"payload truncated: {available} of {expected} bytes present", start + available
            )
        if available > expected:
            raise CorruptDumpError(f"{available - expected} trailing bytes after the payload", start + expected)

        grid = FieldSerializer._grid(header, start)
        payload = np.frombuffer(data, dtype="<f8", count=Nx * Ny * Nz * 3, offset=start)
        bad = np.flatnonzero(~np.isfinite(payload))
        if bad.size:
            raise CorruptDumpError("payload contains non-finite values", start + 8 * int(bad[0]))
        values = np.transpose(payload.reshape(Nz, Ny, Nx, 3), (2, 1, 0, 3)).astype(float)
        logger.debug("Loaded %s on %s", filepath, grid.base)
        return DirectorField(grid, values), header

    @staticmethod
    def _grid(header: FieldDumpHeader, offset: int) -> Grid3D:
        try:
            shape = shape_from_dims(header.domain_kind, **header.domain_dims)
            grid = extrude(make_domain(shape, header.resolution), header.nodes[2])
        except (ValueError, TypeError) as e:
            raise CorruptDumpError(f"cannot rebuild the grid: {e}", offset) from e
        if grid.node_shape != tuple(header.nodes):
            raise CorruptDumpError(
                f"rebuilt grid has nodes {grid.node_shape}, header says {header.nodes}", offset
            )
        if not np.allclose(grid.spacing, header.spacing, rtol=1e-12, atol=0.0):
            raise CorruptDumpError("rebuilt grid spacing differs from the header", offset)
        return grid


# =============================================================================
# Reports
# =============================================================================


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _header_value(value: Optional[float]) -> str:
    return "-" if value is None else repr(float(value))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return value.as_posix()
    return value


class ReportSerializer:
    """CSV tables and JSON reports."""

    @staticmethod
    def csv_text(
        rows: Iterable[dict],
        columns: Sequence[str],
        config_hash: str = "",
        eps: Optional[float] = None,
        eta: Optional[float] = None,
        k: Optional[float] = None,
    ) -> str:
        buffer = io.StringIO()
        buffer.write(
            f"# schema={SCHEMA_VERSION} config_hash={config_hash or '-'} "
            f"eps={_header_value(eps)} eta={_header_value(eta)} k={_header_value(k)}\n"
        )
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return buffer.getvalue()

    @staticmethod
    def write_csv(
        filepath: Path,
        rows: Iterable[dict],
        columns: Sequence[str],
        config_hash: str = "",
        params: Optional[ScalingParams] = None,
        k: Optional[float] = None,
    ) -> Path:
        """
        Write a CSV table with the provenance line
        `# schema=.. config_hash=.. eps=.. eta=.. k=..` above the column names.
        """
        eps = params.eps if params else None
        eta = params.eta if params else None
        if k is None and params is not None:
            k = params.k
        text = ReportSerializer.csv_text(rows, columns, config_hash, eps, eta, k)
        filepath = Path(filepath)
        filepath.write_text(text, encoding="utf-8")
        return filepath

    @staticmethod
    def read_csv(filepath: Path) -> tuple[dict, list[dict]]:
        """Return the provenance fields and the rows (as strings) of a CSV table."""
        lines = Path(filepath).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("# "):
            raise ValueError(f"{filepath} has no provenance line")
        provenance = dict(item.split("=", 1) for item in lines[0][2:].split())
        rows = list(csv.DictReader(lines[1:]))
        return provenance, rows

    @staticmethod
    def write_json(filepath: Path, data: dict) -> Path:
        filepath = Path(filepath)
        with filepath.open("w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2)
            f.write("\n")
        return filepath

    @staticmethod
    def read_json(filepath: Path) -> dict:
        with Path(filepath).open("r", encoding="utf-8") as f:
            return json.load(f)
