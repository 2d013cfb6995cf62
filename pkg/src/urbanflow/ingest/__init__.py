from .shp import Point, Polyline, parse_shp, write_shp
from .dbf import DbfField, parse_dbf, write_dbf
from .network import (
    AttributeRecord,
    ColumnMapping,
    Direction,
    RawNetwork,
    load_network,
    parse_zlevels,
)
from .synthetic import generate_synthetic, raw_network_to_bytes

__all__ = [
    "Point",
    "Polyline",
    "parse_shp",
    "write_shp",
    "DbfField",
    "parse_dbf",
    "write_dbf",
    "AttributeRecord",
    "ColumnMapping",
    "Direction",
    "RawNetwork",
    "load_network",
    "parse_zlevels",
    "generate_synthetic",
    "raw_network_to_bytes",
]
