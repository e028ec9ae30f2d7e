"""Random linear network coding over GF(q).

A sensor stream is cut into source messages of ``K`` equal-length packets.
Every coded packet carries its own coefficient vector, so any receiver
(including one that only overhears part of the traffic) can decode on its own
once it holds ``K`` linearly independent packets of a message.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NotReadyError
from .gf import FieldSpec

_HEADER = struct.Struct("<IH")


@dataclass
class SourceMessage:
    """Source message ``S_index``: ``packets`` is a (K, packet_len) uint8 array."""

    index: int
    packets: np.ndarray

    def __post_init__(self):
        self.packets = np.asarray(self.packets, dtype=np.uint8)
        if self.packets.ndim != 2:
            raise DomainError("packets must be a (K, packet_len) array")
        if self.K < 2:
            raise DomainError(f"a source message needs K >= 2 packets, got {self.K}")
        if self.packet_len < 1:
            raise DomainError("packet_len must be at least 1")

    @property
    def K(self) -> int:
        return self.packets.shape[0]

    @property
    def packet_len(self) -> int:
        return self.packets.shape[1]


@dataclass
class CodedPacket:
    message_index: int
    coeffs: np.ndarray
    payload: np.ndarray

    def to_bytes(self) -> bytes:
        """Wire layout: u32 LE message index, u16 LE K, K coefficient bytes, payload bytes."""
        coeffs = np.asarray(self.coeffs, dtype=np.uint8)
        return (
            _HEADER.pack(self.message_index, len(coeffs))
            + coeffs.tobytes()
            + np.asarray(self.payload, dtype=np.uint8).tobytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CodedPacket":
        if len(data) < _HEADER.size:
            raise DomainError(f"coded packet truncated: {len(data)} bytes")
        index, k = _HEADER.unpack_from(data)
        if len(data) < _HEADER.size + k:
            raise DomainError(f"coded packet truncated: header announces K={k}")
        body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        return cls(index, body[:k].copy(), body[k:].copy())


class IngestResult(NamedTuple):
    innovative: bool
    rank: int


class DecoderState:
    """Incremental Gaussian elimination for one source message.

    Rows are kept in reduced row-echelon form, one per pivot column, each with
    its payload attached. Once every column has a pivot the payload rows are
    the source packets themselves.
    """

    def __init__(self, message_index: int, K: int, field: FieldSpec, packet_len: int | None = None):
        if K < 1:
            raise DomainError("K must be positive")
        self.message_index = message_index
        self.K = K
        self.field = field
        self.packet_len = packet_len
        self._coeffs = np.zeros((K, K), dtype=np.uint8)
        self._payload = None if packet_len is None else np.zeros((K, packet_len), dtype=np.uint8)
        self._has_pivot = np.zeros(K, dtype=bool)
        self.rank = 0

    @property
    def decodable(self) -> bool:
        return self.rank == self.K

    def ingest(self, pkt: CodedPacket) -> IngestResult:
        if pkt.message_index != self.message_index:
            raise DomainError(
                f"packet for message {pkt.message_index} fed to decoder of message {self.message_index}"
            )
        coeffs = np.asarray(pkt.coeffs, dtype=np.uint8)
        payload = np.asarray(pkt.payload, dtype=np.uint8)
        if coeffs.shape != (self.K,):
            raise DomainError(f"expected {self.K} coefficients, got {coeffs.shape[0]}")
        if self._payload is None:
            self.packet_len = payload.shape[0]
            self._payload = np.zeros((self.K, self.packet_len), dtype=np.uint8)
        elif payload.shape != (self.packet_len,):
            raise DomainError(f"expected payload of {self.packet_len} symbols, got {payload.shape[0]}")
        if self.rank == self.K:
            return IngestResult(False, self.rank)

        f = self.field
        row = coeffs.copy()
        data = payload.copy()
        for c in np.nonzero(self._has_pivot & (row != 0))[0]:
            a = int(row[c])
            row ^= f.scale(a, self._coeffs[c])
            data ^= f.scale(a, self._payload[c])
        nz = np.nonzero(row)[0]
        if nz.size == 0:
            return IngestResult(False, self.rank)

        c = int(nz[0])
        a = int(row[c])
        if a != 1:
            inv = int(f.inv[a])
            row = f.scale(inv, row)
            data = f.scale(inv, data)
        # clear the new pivot column from existing rows to stay fully reduced
        for r in np.nonzero(self._has_pivot & (self._coeffs[:, c] != 0))[0]:
            b = int(self._coeffs[r, c])
            self._coeffs[r] ^= f.scale(b, row)
            self._payload[r] ^= f.scale(b, data)
        self._coeffs[c] = row
        self._payload[c] = data
        self._has_pivot[c] = True
        self.rank += 1
        return IngestResult(True, self.rank)

    def extract(self) -> np.ndarray:
        """The K source packets, in order, as a (K, packet_len) array."""
        if self.rank < self.K:
            raise NotReadyError(f"message {self.message_index}: rank {self.rank} < K={self.K}")
        return self._payload.copy()


def segment_stream(data, K: int, packet_len: int) -> list[SourceMessage]:
    """Split a symbol sequence into source messages, zero-padding the last one.

    The caller keeps ``len(data)`` to undo the padding in :func:`reassemble_stream`.
    """
    if K < 2:
        raise DomainError(f"K must be at least 2, got {K}")
    if packet_len < 1:
        raise DomainError(f"packet_len must be at least 1, got {packet_len}")
    symbols = np.asarray(data, dtype=np.uint8).ravel()
    if symbols.size == 0:
        return []
    block = K * packet_len
    n_msgs = -(-symbols.size // block)
    padded = np.zeros(n_msgs * block, dtype=np.uint8)
    padded[: symbols.size] = symbols
    blocks = padded.reshape(n_msgs, K, packet_len)
    return [SourceMessage(t + 1, blocks[t].copy()) for t in range(n_msgs)]


def reassemble_stream(messages: Sequence[SourceMessage], original_len: int) -> np.ndarray:
    if not messages:
        stream = np.zeros(0, dtype=np.uint8)
    else:
        stream = np.concatenate([m.packets.ravel() for m in messages])
    if original_len > stream.size:
        raise DomainError(f"original_len {original_len} exceeds the {stream.size} available symbols")
    return stream[:original_len]


def encode_packet(
    msg: SourceMessage,
    field: FieldSpec,
    rng: np.random.Generator,
    coeffs: np.ndarray | None = None,
) -> CodedPacket:
    """Emit one coded packet with coefficients drawn uniformly from GF(q)^K.

    ``coeffs`` overrides the draw (no randomness is consumed in that case).
    The all-zero vector is a legal draw and is sent like any other.
    """
    if coeffs is None:
        coeffs = rng.integers(0, field.q, size=msg.K, dtype=np.uint8)
    else:
        coeffs = np.asarray(coeffs, dtype=np.uint8)
        if coeffs.shape != (msg.K,):
            raise DomainError(f"expected {msg.K} coefficients, got shape {coeffs.shape}")
        field.check_array(coeffs)
    if field.q == 2 and msg.packets.max(initial=0) > 1:
        raise DomainError("GF(2) messages may only hold symbols 0 and 1")
    return CodedPacket(msg.index, coeffs, field.combine(coeffs, msg.packets))


def decoder_ingest(state: DecoderState, pkt: CodedPacket) -> IngestResult:
    return state.ingest(pkt)


def decoder_extract(state: DecoderState) -> np.ndarray:
    return state.extract()


def bytes_to_symbols(data: bytes, q: int) -> np.ndarray:
    """File bytes as GF(q) symbols; for q=2 each byte becomes 8 bits (MSB first)."""
    raw = np.frombuffer(data, dtype=np.uint8)
    return np.unpackbits(raw) if q == 2 else raw.copy()


def symbols_to_bytes(symbols: np.ndarray, q: int) -> bytes:
    symbols = np.asarray(symbols, dtype=np.uint8)
    return (np.packbits(symbols) if q == 2 else symbols).tobytes()
