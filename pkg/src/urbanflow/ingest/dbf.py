"""Reader and writer for the attribute-table subset of the dBASE format.

Character fields come out trimmed, Numeric fields as int or float, and a
field of blanks as None so the column mapping can apply defaults later.
Rows flagged deleted (0x2A) are skipped.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

from ..errors import BadHeader, FieldOverflow

_HEADER_LEN = 32
_DESCRIPTOR_LEN = 32
_TERMINATOR = 0x0D
_FLAG_LIVE = 0x20
_FLAG_DELETED = 0x2A

FieldValue = str | int | float | None


class DbfField(NamedTuple):
    name: str
    type: str
    length: int
    decimals: int


def _parse_value(field: DbfField, raw: bytes) -> FieldValue:
    text = raw.decode("ascii", errors="replace").strip()
    if field.type == "N" or field.type == "F":
        if not text:
            return None
        if any(c in text for c in ".eE"):
            return float(text)
        return int(text)
    return text


def parse_dbf(data: bytes) -> tuple[list[DbfField], list[dict[str, FieldValue]]]:
    """Parse .dbf bytes into field descriptors and live rows (in file order)."""
    if len(data) < _HEADER_LEN:
        raise BadHeader(f"file of {len(data)} bytes is shorter than the header")
    record_count, header_size, record_size = struct.unpack_from("<IHH", data, 4)
    if header_size < _HEADER_LEN + 1 or header_size > len(data):
        raise BadHeader(f"header size {header_size} out of range")
    if (header_size - _HEADER_LEN - 1) % _DESCRIPTOR_LEN != 0:
        raise BadHeader(f"header size {header_size} does not fit whole field descriptors")
    if data[header_size - 1] != _TERMINATOR:
        raise BadHeader("field descriptors not terminated by 0x0D")

    fields: list[DbfField] = []
    for off in range(_HEADER_LEN, header_size - 1, _DESCRIPTOR_LEN):
        raw = data[off : off + _DESCRIPTOR_LEN]
        name = raw[:11].split(b"\x00", 1)[0].decode("ascii", errors="replace")
        ftype = chr(raw[11])
        fields.append(DbfField(name, ftype, raw[16], raw[17]))

    if record_size != 1 + sum(f.length for f in fields):
        raise FieldOverflow(
            f"record size {record_size} != 1 + sum of field widths {sum(f.length for f in fields)}"
        )

    rows: list[dict[str, FieldValue]] = []
    for i in range(record_count):
        off = header_size + i * record_size
        if off + record_size > len(data):
            raise BadHeader(f"row {i} runs past end of file")
        flag = data[off]
        if flag == _FLAG_DELETED:
            continue
        if flag != _FLAG_LIVE:
            raise BadHeader(f"row {i}: unknown deletion flag 0x{flag:02X}")
        row: dict[str, FieldValue] = {}
        pos = off + 1
        for field in fields:
            row[field.name] = _parse_value(field, data[pos : pos + field.length])
            pos += field.length
        rows.append(row)
    return fields, rows


def _format_value(field: DbfField, value: FieldValue) -> bytes:
    if value is None:
        return b" " * field.length
    if field.type in ("N", "F"):
        if field.decimals > 0:
            text = f"{float(value):.{field.decimals}f}"
        else:
            text = str(int(value))
        if len(text) > field.length:
            raise FieldOverflow(f"{field.name}: '{text}' wider than {field.length}")
        return text.rjust(field.length).encode("ascii")
    text = str(value)
    if len(text) > field.length:
        raise FieldOverflow(f"{field.name}: '{text}' wider than {field.length}")
    return text.ljust(field.length).encode("ascii")


def write_dbf(fields: list[DbfField], rows: list[dict[str, FieldValue]]) -> bytes:
    """Serialize rows to .dbf bytes (dBASE III layout, all rows live)."""
    record_size = 1 + sum(f.length for f in fields)
    header_size = _HEADER_LEN + _DESCRIPTOR_LEN * len(fields) + 1

    out = bytearray(header_size)
    out[0] = 0x03
    out[1:4] = bytes((26, 1, 1))  # fixed stamp keeps output byte-stable
    struct.pack_into("<IHH", out, 4, len(rows), header_size, record_size)
    for i, field in enumerate(fields):
        off = _HEADER_LEN + i * _DESCRIPTOR_LEN
        out[off : off + 11] = field.name.encode("ascii").ljust(11, b"\x00")
        out[off + 11] = ord(field.type)
        out[off + 16] = field.length
        out[off + 17] = field.decimals
    out[header_size - 1] = _TERMINATOR

    for row in rows:
        record = bytearray((_FLAG_LIVE,))
        for field in fields:
            record += _format_value(field, row.get(field.name))
        out += record
    out.append(0x1A)
    return bytes(out)
