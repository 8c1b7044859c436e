"""Sharded feature store: servers, transports, client pulls, accounting."""

from __future__ import annotations

import socket
import socketserver
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import wire


class LookupError_(KeyError):
    """Pull for a node id the contacted shard does not own."""


class TransportError(ConnectionError):
    """Transport-level failure; the request may be retried."""


def bytes_for(n: int, d: int) -> int:
    """Network bytes for n feature rows of dimension d (float32)."""
    return n * d * 4


@dataclass
class TransferAccount:
    """Client-side traffic counters for one category of pulls."""

    rpc_calls: int = 0
    nodes_pulled: int = 0
    bytes_pulled: int = 0

    def charge(self, rpcs: int, nodes: int, feat_dim: int) -> None:
        self.rpc_calls += rpcs
        self.nodes_pulled += nodes
        self.bytes_pulled += bytes_for(nodes, feat_dim)

    def snapshot(self) -> tuple[int, int, int]:
        return (self.rpc_calls, self.nodes_pulled, self.bytes_pulled)


class StoreShard:
    """Serves feature rows for the nodes one partition owns.

    Requests for non-owned ids are answered NOT_OWNED, never silently
    misanswered. latency_ms, when set, is slept per handled request to
    make latency hiding measurable on one machine.
    """

    def __init__(self, part: int, owned_ids: np.ndarray, rows: np.ndarray,
                 latency_ms: float = 0.0):
        self.part = part
        self.owned_ids = np.asarray(owned_ids, dtype=np.int64)  # sorted
        self.rows = np.ascontiguousarray(rows, dtype=np.float32)
        self.feat_dim = self.rows.shape[1]
        self.latency_ms = latency_ms
        self._lock = threading.Lock()
        self.rpc_calls = 0
        self.nodes_served = 0
        self.payload_bytes = 0

    def rows_for_local(self, ids: np.ndarray) -> np.ndarray:
        """Direct memory read for the owning worker; no RPC, no counters."""
        pos = np.searchsorted(self.owned_ids, ids)
        return self.rows[pos]

    def handle(self, payload: bytes) -> bytes:
        """Decode one request payload and produce the response payload."""
        if self.latency_ms > 0:
            time.sleep(self.latency_ms / 1000.0)
        try:
            _msg_type, ids = wire.decode_request(payload)
        except wire.WireError:
            return wire.encode_response(wire.STATUS_MALFORMED, None, self.feat_dim)
        pos = np.searchsorted(self.owned_ids, ids)
        pos_clip = np.minimum(pos, len(self.owned_ids) - 1) if len(self.owned_ids) else pos
        if len(self.owned_ids) == 0 or not np.array_equal(self.owned_ids[pos_clip], ids):
            return wire.encode_response(wire.STATUS_NOT_OWNED, None, self.feat_dim)
        rows = self.rows[pos_clip]
        with self._lock:
            self.rpc_calls += 1
            self.nodes_served += len(ids)
            self.payload_bytes += bytes_for(len(ids), self.feat_dim)
        return wire.encode_response(wire.STATUS_OK, rows, self.feat_dim)


class InprocTransport:
    """Calls the shard handler directly, still through the byte codec."""

    def __init__(self, shard: StoreShard):
        self._shard = shard

    def request(self, payload: bytes) -> bytes:
        return self._shard.handle(payload)

    def close(self) -> None:
        pass


class TcpTransport:
    """One persistent connection to a shard server; framed payloads."""

    def __init__(self, host: str, port: int):
        try:
            self._sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise TransportError(f"connect to {host}:{port} failed") from exc
        self._lock = threading.Lock()

    def request(self, payload: bytes) -> bytes:
        with self._lock:
            try:
                self._sock.sendall(wire.frame(payload))
                resp = wire.read_frame(self._sock)
            except OSError as exc:
                raise TransportError("request failed") from exc
        if not resp:
            raise TransportError("server closed connection")
        return resp

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class _ShardRequestHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        while True:
            payload = wire.read_frame(self.request)
            if not payload:
                return
            resp = self.server.shard.handle(payload)  # type: ignore[attr-defined]
            self.request.sendall(wire.frame(resp))


class TcpShardServer:
    """Background TCP server exposing one shard."""

    def __init__(self, shard: StoreShard, host: str = "127.0.0.1", port: int = 0):
        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = _Server((host, port), _ShardRequestHandler)
        self._server.shard = shard  # type: ignore[attr-defined]
        self.address = self._server.server_address
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


class StoreClient:
    """Groups pull requests by owning shard and reassembles the rows.

    One request message to one shard counts as one RPC call; a pull that
    spans k shards is charged k calls regardless of id count.
    """

    def __init__(self, owner: np.ndarray, transports: list, feat_dim: int):
        self.owner = owner
        self.transports = transports
        self.feat_dim = feat_dim

    def _pull(self, msg_type: int, node_ids: np.ndarray,
              account: TransferAccount | None) -> np.ndarray:
        ids = np.asarray(node_ids, dtype=np.int64)
        out = np.empty((len(ids), self.feat_dim), dtype=np.float32)
        if len(ids) == 0:
            return out
        owners = self.owner[ids]
        rpcs = 0
        for p in np.unique(owners):
            sel = np.flatnonzero(owners == p)
            payload = wire.encode_request(msg_type, ids[sel])
            resp = self.transports[p].request(payload)
            status, rows, dim = wire.decode_response(resp)
            if status == wire.STATUS_NOT_OWNED:
                raise LookupError_(f"shard {p} does not own requested ids")
            if status != wire.STATUS_OK:
                raise wire.WireError(f"shard {p} rejected request (status {status})")
            if dim != self.feat_dim:
                raise wire.WireError(f"shard {p} returned dim {dim}, expected {self.feat_dim}")
            out[sel] = rows
            rpcs += 1
        if account is not None:
            account.charge(rpcs, len(ids), self.feat_dim)
        return out

    def sync_pull(self, node_ids: np.ndarray,
                  account: TransferAccount | None = None) -> np.ndarray:
        """On-demand pull; rows come back in request order."""
        return self._pull(wire.MSG_SYNC_PULL, node_ids, account)

    def vector_pull(self, node_ids: np.ndarray,
                    account: TransferAccount | None = None) -> np.ndarray:
        """Bulk pull for cache fills; same accounting rule, one request
        per owning shard no matter how many ids."""
        return self._pull(wire.MSG_VECTOR_PULL, node_ids, account)

    def close(self) -> None:
        for t in self.transports:
            t.close()
