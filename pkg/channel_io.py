"""
JSON channel documents.

    {"dim_in": 3, "dim_out": 3,
     "kraus": [[[[re, im], ...], ...], ...],
     "partition": [2, 1]}

Kraus operators are row-major nested arrays whose scalars are [re, im]
pairs; "partition" is optional.
"""

import json
import logging
import numbers
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from channel_core import KrausChannel
from errors import ChannelDocumentError, QcapError
from pcds_channels import BlockPartition

logger = logging.getLogger(__name__)


def _encode_matrix(M: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def channel_to_document(ch: KrausChannel, partition: Optional[BlockPartition] = None) -> Dict[str, Any]:
    document = {
        'dim_in': ch.dim_in,
        'dim_out': ch.dim_out,
        'kraus': [_encode_matrix(K) for K in ch.kraus],
    }
    if partition is not None:
        document['partition'] = partition.to_list()
    return document


def _positive_int(obj: Dict[str, Any], key: str) -> int:
    if key not in obj:
        raise ChannelDocumentError("missing field", key)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ChannelDocumentError(f"expected a positive integer, got {value!r}", key)
    return value


def _is_real(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _decode_matrix(raw, index: int, rows: int, cols: int) -> np.ndarray:
    location = f"kraus[{index}]"
    if not isinstance(raw, list) or len(raw) != rows:
        raise ChannelDocumentError(f"expected {rows} rows", location)
    M = np.zeros((rows, cols), dtype=complex)
    for r, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != cols:
            raise ChannelDocumentError(f"expected {cols} entries", f"{location}[{r}]")
        for c, entry in enumerate(row):
            if not (isinstance(entry, list) and len(entry) == 2 and all(_is_real(x) for x in entry)):
                raise ChannelDocumentError(f"expected [re, im], got {entry!r}", f"{location}[{r}][{c}]")
            M[r, c] = complex(entry[0], entry[1])
    return M


def parse_channel_document(obj: Any) -> Tuple[KrausChannel, Optional[BlockPartition]]:
    """Validate a decoded document and build the channel and optional partition"""
    if not isinstance(obj, dict):
        raise ChannelDocumentError("document must be a JSON object")
    dim_in = _positive_int(obj, 'dim_in')
    dim_out = _positive_int(obj, 'dim_out')

    kraus = obj.get('kraus')
    if not isinstance(kraus, list) or not kraus:
        raise ChannelDocumentError("expected a non-empty list of matrices", 'kraus')
    operators = [_decode_matrix(raw, j, dim_out, dim_in) for j, raw in enumerate(kraus)]

    partition = None
    if obj.get('partition') is not None:
        dims = obj['partition']
        if not isinstance(dims, list):
            raise ChannelDocumentError("expected a list of block dimensions", 'partition')
        for i, d in enumerate(dims):
            if isinstance(d, bool) or not isinstance(d, int) or d <= 0:
                raise ChannelDocumentError(f"expected a positive integer, got {d!r}", f"partition[{i}]")
        if sum(dims) != dim_in:
            raise ChannelDocumentError(f"block dimensions sum to {sum(dims)}, expected {dim_in}", 'partition')
        try:
            partition = BlockPartition(tuple(dims))
        except QcapError as e:
            raise ChannelDocumentError(str(e), 'partition') from e

    return KrausChannel(dim_in, dim_out, tuple(operators)), partition


def load_channel_document(path: str) -> Tuple[KrausChannel, Optional[BlockPartition]]:
    try:
        with open(path, 'r') as f:
            obj = json.load(f)
    except OSError as e:
        raise ChannelDocumentError(f"cannot read file: {e.strerror}", path) from e
    except json.JSONDecodeError as e:
        raise ChannelDocumentError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from e
    channel, partition = parse_channel_document(obj)
    logger.debug(f"Loaded {channel} from {path}")
    return channel, partition


def dump_channel_document(path: str, ch: KrausChannel, partition: Optional[BlockPartition] = None):
    with open(path, 'w') as f:
        json.dump(channel_to_document(ch, partition), f, indent=2)
    logger.info(f"Channel document written to {path}")
