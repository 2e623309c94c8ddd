"""
Binary container for grid fields.

Layout: b"GFLD", one version byte, little-endian uint32 header length, a UTF-8
JSON header, then the complex128 little-endian payload in row-major order with
the x₀ axis first.
"""
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Literal, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from fundsol import GridField, GridSpec

logger = logging.getLogger(__name__)

MAGIC = b"GFLD"
VERSION = 1
DTYPE = '<c16'


class GridFieldFormatError(ValueError):
    """Malformed or corrupted .gfield content."""


class GridFieldHeader(BaseModel):
    spec: GridSpec
    role: Literal['symbol_inverse', 'N_sigma', 'N', 'rhs', 'solution']
    shape: List[int]
    endianness: Literal['little'] = 'little'
    dtype: Literal['complex128'] = 'complex128'
    sha256: str
    meta: Dict[str, Any] = {}


def _payload(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype=DTYPE).tobytes(order='C')


def write_gfield(path: Union[str, Path], field: GridField) -> Path:
    """Write a field; returns the path written."""
    path = Path(path)
    payload = _payload(field.values)
    header = GridFieldHeader(
        spec=field.spec,
        role=field.role,
        shape=list(field.values.shape),
        sha256=hashlib.sha256(payload).hexdigest(),
        meta=field.meta,
    )
    encoded = json.dumps(header.model_dump(mode='json'), sort_keys=True).encode('utf-8')
    with path.open('wb') as handle:
        handle.write(MAGIC)
        handle.write(struct.pack('<BI', VERSION, len(encoded)))
        handle.write(encoded)
        handle.write(payload)
    logger.info(f"Wrote {field.role} field {header.shape} to {path}")
    return path


def read_gfield(path: Union[str, Path]) -> GridField:
    """
    Read a field back, checking magic, version, shape and checksum.

    Raises:
        GridFieldFormatError: any structural or checksum mismatch
    """
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise GridFieldFormatError(f"{path}: not a .gfield file")
    if len(blob) < 9:
        raise GridFieldFormatError(f"{path}: truncated preamble")
    version, header_length = struct.unpack('<BI', blob[4:9])
    if version != VERSION:
        raise GridFieldFormatError(f"{path}: unsupported version {version}")
    try:
        header = GridFieldHeader.model_validate_json(blob[9:9 + header_length])
    except ValidationError as exc:
        raise GridFieldFormatError(f"{path}: bad header: {exc}") from exc

    payload = blob[9 + header_length:]
    if hashlib.sha256(payload).hexdigest() != header.sha256:
        raise GridFieldFormatError(f"{path}: payload checksum mismatch")
    expected = int(np.prod(header.shape)) * np.dtype(DTYPE).itemsize
    if len(payload) != expected:
        raise GridFieldFormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    values = np.frombuffer(payload, dtype=DTYPE).reshape(header.shape)
    try:
        return GridField(header.spec, values, header.role, dict(header.meta))
    except ValueError as exc:
        raise GridFieldFormatError(f"{path}: {exc}") from exc
