"""Oracles: the black boxes this engine explains.

An oracle is anything that deterministically maps a record to a binary
label. The builtin random forest plays the black box in experiments; a
threshold model and a constant model support testing; and the wire-protocol
client makes any external process explainable.

Wire protocol (text, line-delimited, UTF-8, ``\\n`` terminator, bit-exact):

- ``HELLO <n_features> <kinds>`` with kinds a comma-separated list of
  ``c``/``n``; server answers ``OK`` or ``ERR <msg>``.
- ``PREDICT <v1>,<v2>,...`` (numerics in shortest round-trip decimal form,
  at most 17 significant digits; categoricals verbatim with commas escaped
  as ``%2C``); server answers ``0`` or ``1``.
- ``BATCH <k>`` followed by k value lines formatted like PREDICT payloads;
  server answers k label lines.
- ``BYE``; server closes.
"""

from __future__ import annotations

import math
import shlex
import socket
import subprocess
import threading

import numpy as np

from . import cart
from .dataset import (
    CATEGORICAL,
    FeatureSchema,
    LabeledDataset,
    Record,
    SchemaMismatchError,
    categorical,
    continuous,
)
from .seeding import spawn_rng


class ProtocolError(RuntimeError):
    """Handshake failure, transport loss or malformed wire traffic."""


class Oracle:
    """Base class: deterministic record -> {0,1} classifier."""

    concurrency_safe: bool = True

    def __init__(self, schema: FeatureSchema):
        self.schema = schema

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_batch(self, records) -> np.ndarray:
        X = np.stack([self._encode(r) for r in records])
        return self.predict_encoded(X)

    def predict(self, record) -> int:
        return int(self.predict_batch([record])[0])

    def _encode(self, record) -> np.ndarray:
        if isinstance(record, Record):
            if record.schema != self.schema:
                raise SchemaMismatchError("record schema differs from oracle schema")
            return record.encoded()
        return self.schema.encode(record)

    def close(self) -> None:
        """Release any transport resources (no-op for in-process oracles)."""


class ConstantOracle(Oracle):
    """Always answers the same label (degenerate black box for tests)."""

    def __init__(self, schema: FeatureSchema, label: int):
        super().__init__(schema)
        self.label = int(label)

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_2d(X)), self.label, dtype=np.int64)


class ThresholdOracle(Oracle):
    """Separable black box: label 1 iff one feature exceeds a threshold."""

    def __init__(self, schema: FeatureSchema, feature: str, threshold: float):
        super().__init__(schema)
        self.feature_index = schema.index_of(feature)
        self.threshold = float(threshold)

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return (X[:, self.feature_index] > self.threshold).astype(np.int64)


class CallableOracle(Oracle):
    """Wraps a function over encoded rows, for scripted black boxes."""

    def __init__(self, schema: FeatureSchema, fn, concurrency_safe: bool = True):
        super().__init__(schema)
        self.fn = fn
        self.concurrency_safe = concurrency_safe

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.asarray([int(self.fn(row)) for row in X], dtype=np.int64)


class CountingOracle(Oracle):
    """Delegating wrapper that counts how many records were queried."""

    def __init__(self, inner: Oracle):
        super().__init__(inner.schema)
        self.inner = inner
        self.concurrency_safe = inner.concurrency_safe
        self._lock = threading.Lock()
        self.n_queries = 0

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        with self._lock:
            self.n_queries += len(X)
        return self.inner.predict_encoded(X)

    def close(self) -> None:
        self.inner.close()


class CachingOracle(Oracle):
    """Memoises labels by record content (GA populations repeat genomes)."""

    def __init__(self, inner: Oracle):
        super().__init__(inner.schema)
        self.inner = inner
        self.concurrency_safe = False
        self._cache: dict[bytes, int] = {}

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.empty(len(X), dtype=np.int64)
        missing = []
        for i, row in enumerate(X):
            key = row.tobytes()
            hit = self._cache.get(key)
            if hit is None:
                missing.append(i)
            else:
                out[i] = hit
        if missing:
            labels = self.inner.predict_encoded(X[missing])
            for i, lab in zip(missing, labels):
                self._cache[X[i].tobytes()] = int(lab)
                out[i] = lab
        return out


class ForestOracle(Oracle):
    """Bagged CART forest: majority vote over seeded bootstrap trees.

    Ties resolve to class 0. Immutable after training and safe for
    concurrent prediction.
    """

    def __init__(self, schema, trees, n_trees, max_depth, features_per_split, seed):
        super().__init__(schema)
        self.trees = tuple(trees)
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.features_per_split = features_per_split
        self.seed = seed

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(X)
        return (2 * votes > self.n_trees).astype(np.int64)

    def dumps(self) -> str:
        """Plain-text dump of schema and all trees (deterministic)."""
        lines = [
            f"forest version=1 n_trees={self.n_trees} max_depth={self.max_depth} "
            f"features_per_split={self.features_per_split} seed={self.seed}"
        ]
        lines.append(f"schema {len(self.schema)}")
        for f in self.schema.features:
            if f.kind == CATEGORICAL:
                cats = ",".join(v.replace(",", "%2C") for v in f.values)
                lines.append(f"{f.name}\tc\t{cats}")
            else:
                lines.append(f"{f.name}\tn\t{f.lo!r},{f.hi!r}")
        for t, tree in enumerate(self.trees):
            lines.append(f"tree {t} nodes={tree.n_nodes}")
            for i in range(tree.n_nodes):
                if tree.feature[i] < 0:
                    lines.append(
                        f"{i} leaf {tree.klass[i]} {tree.counts[i, 0]} {tree.counts[i, 1]}"
                    )
                else:
                    kind = "cat" if tree.is_cat[i] else "num"
                    lines.append(
                        f"{i} split {tree.feature[i]} {kind} {float(tree.value[i])!r} "
                        f"{tree.left[i]} {tree.right[i]} {tree.counts[i, 0]} {tree.counts[i, 1]}"
                    )
        lines.append("end")
        return "\n".join(lines) + "\n"


def train_forest(
    data: LabeledDataset,
    n_trees: int = 100,
    max_depth: int = 16,
    seed: int = 0,
) -> ForestOracle:
    """Train the builtin random forest black box.

    Bootstrap samples of size n per tree, ceil(sqrt(m)) candidate features
    per split, all randomness derived from ``seed``.
    """
    if len(data) < 2:
        raise ValueError("need at least 2 records to train a forest")
    if len(np.unique(data.labels)) < 2:
        raise ValueError("training data contains a single class")
    X = data.matrix
    y = data.labels
    m = len(data.schema)
    cat_mask = data.schema.kinds_mask
    k = int(math.ceil(math.sqrt(m)))
    trees = []
    for t in range(n_trees):
        rng = spawn_rng(seed, "forest-tree", t)
        rows = rng.integers(0, len(data), size=len(data))
        trees.append(
            cart.grow_tree(
                X[rows],
                y[rows],
                cat_mask,
                max_depth=max_depth,
                min_leaf=1,
                n_feature_candidates=k,
                rng=rng,
            )
        )
    return ForestOracle(data.schema, trees, n_trees, max_depth, k, seed)


def relabel(oracle: Oracle, data: LabeledDataset) -> LabeledDataset:
    """Replace the dataset's labels with the oracle's own predictions.

    The pipeline explains the black box, not ground truth, so original
    labels are discarded.
    """
    if oracle.schema != data.schema:
        raise SchemaMismatchError("oracle and dataset schemas differ")
    return data.with_labels(oracle.predict_encoded(data.matrix))


# --- wire protocol -----------------------------------------------------------

def schema_kinds(schema: FeatureSchema) -> str:
    return ",".join("c" if f.is_categorical else "n" for f in schema.features)


def hello_line(schema: FeatureSchema) -> str:
    return f"HELLO {len(schema)} {schema_kinds(schema)}"


def format_values(schema: FeatureSchema, row: np.ndarray) -> str:
    """Values payload for PREDICT/BATCH lines from an encoded row."""
    parts = []
    for i, f in enumerate(schema.features):
        if f.is_categorical:
            parts.append(f.values[int(row[i])].replace(",", "%2C"))
        else:
            parts.append(repr(float(row[i])))
    return ",".join(parts)


def parse_values(schema: FeatureSchema, payload: str) -> np.ndarray:
    """Inverse of :func:`format_values` (used by loopback test servers)."""
    parts = payload.split(",")
    if len(parts) != len(schema):
        raise ProtocolError(f"expected {len(schema)} values, got {len(parts)}")
    row = np.empty(len(schema), dtype=np.float64)
    for i, f in enumerate(schema.features):
        if f.is_categorical:
            row[i] = schema.encode_value(i, parts[i].replace("%2C", ","))
        else:
            row[i] = float(parts[i])
    return row


class ExternalEndpoint:
    """Where an external oracle lives: ``tcp:<host:port>`` or ``cmd:<argv>``."""

    def __init__(self, kind: str, address):
        if kind not in ("tcp", "cmd"):
            raise ValueError(f"unknown transport {kind!r}")
        self.kind = kind
        self.address = address

    @classmethod
    def parse(cls, spec: str) -> "ExternalEndpoint":
        if spec.startswith("tcp:"):
            host, _, port = spec[4:].rpartition(":")
            if not host:
                raise ValueError(f"bad tcp endpoint {spec!r}, expected tcp:<host:port>")
            return cls("tcp", (host, int(port)))
        if spec.startswith("cmd:"):
            return cls("cmd", tuple(shlex.split(spec[4:])))
        raise ValueError(f"unknown oracle endpoint {spec!r}")


class _TcpTransport:
    def __init__(self, host, port, timeout):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def send(self, line: str):
        self.sock.sendall(line.encode() + b"\n")

    def recv(self) -> str:
        raw = self.rfile.readline()
        if not raw:
            raise ProtocolError("connection closed by server")
        return raw.decode().rstrip("\n")

    def close(self):
        try:
            self.rfile.close()
        finally:
            self.sock.close()


class _CmdTransport:
    def __init__(self, argv):
        self.proc = subprocess.Popen(
            list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )

    def send(self, line: str):
        self.proc.stdin.write(line.encode() + b"\n")
        self.proc.stdin.flush()

    def recv(self) -> str:
        raw = self.proc.stdout.readline()
        if not raw:
            raise ProtocolError("oracle process closed its output")
        return raw.decode().rstrip("\n")

    def close(self):
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)
        finally:
            self.proc.stdout.close()


class ExternalOracle(Oracle):
    """Client for an oracle speaking the wire protocol.

    Requests are serialised through a lock: callers may predict from
    several threads but lines hit the transport one at a time, in order.
    """

    concurrency_safe = False

    def __init__(self, schema: FeatureSchema, transport):
        super().__init__(schema)
        self._transport = transport
        self._lock = threading.Lock()

    def predict_encoded(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        lines = [format_values(self.schema, row) for row in X]
        with self._lock:
            self._transport.send(f"BATCH {len(lines)}")
            for line in lines:
                self._transport.send(line)
            labels = [self._read_label() for _ in lines]
        return np.asarray(labels, dtype=np.int64)

    def _read_label(self) -> int:
        reply = self._transport.recv()
        if reply.startswith("ERR"):
            raise ProtocolError(f"server error: {reply[3:].strip()}")
        if reply not in ("0", "1"):
            raise ProtocolError(f"label out of domain: {reply!r}")
        return int(reply)

    def close(self):
        with self._lock:
            try:
                self._transport.send("BYE")
            finally:
                self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_external(
    endpoint: ExternalEndpoint, schema: FeatureSchema, timeout: float = 30.0
) -> ExternalOracle:
    """Open the transport and complete the HELLO handshake."""
    try:
        if endpoint.kind == "tcp":
            transport = _TcpTransport(*endpoint.address, timeout=timeout)
        else:
            transport = _CmdTransport(endpoint.address)
    except OSError as e:
        raise ProtocolError(f"cannot reach oracle endpoint: {e}") from e
    try:
        transport.send(hello_line(schema))
        reply = transport.recv()
    except Exception:
        transport.close()
        raise
    if reply != "OK":
        transport.close()
        if reply.startswith("ERR"):
            raise ProtocolError(f"handshake rejected: {reply[3:].strip()}")
        raise ProtocolError(f"malformed handshake reply: {reply!r}")
    return ExternalOracle(schema, transport)


def load_forest_dump(text: str) -> ForestOracle:
    """Rebuild a forest (and its schema) from :meth:`ForestOracle.dumps` text."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("forest "):
        raise ValueError("not a forest dump")
    header = dict(kv.split("=") for kv in lines[0].split()[1:])
    pos = 1
    if not lines[pos].startswith("schema "):
        raise ValueError("forest dump lacks a schema section")
    n_features = int(lines[pos].split()[1])
    pos += 1
    feats = []
    for _ in range(n_features):
        name, kind, rest = lines[pos].split("\t")
        if kind == "c":
            feats.append(categorical(name, [v.replace("%2C", ",") for v in rest.split(",")]))
        else:
            lo, hi = rest.split(",")
            feats.append(continuous(name, float(lo), float(hi)))
        pos += 1
    schema = FeatureSchema(tuple(feats))
    trees = []
    while pos < len(lines) and lines[pos].startswith("tree "):
        n_nodes = int(lines[pos].split()[2].split("=")[1])
        pos += 1
        feature = [0] * n_nodes
        value = [0.0] * n_nodes
        is_cat = [False] * n_nodes
        left = [0] * n_nodes
        right = [0] * n_nodes
        klass = [0] * n_nodes
        counts = [(0, 0)] * n_nodes
        for _ in range(n_nodes):
            parts = lines[pos].split()
            i = int(parts[0])
            if parts[1] == "leaf":
                feature[i] = -1
                left[i] = right[i] = i
                klass[i] = int(parts[2])
                counts[i] = (int(parts[3]), int(parts[4]))
            else:
                feature[i] = int(parts[2])
                is_cat[i] = parts[3] == "cat"
                value[i] = float(parts[4])
                left[i] = int(parts[5])
                right[i] = int(parts[6])
                counts[i] = (int(parts[7]), int(parts[8]))
                n0, n1 = counts[i]
                klass[i] = 0 if n0 >= n1 else 1
            pos += 1
        trees.append(cart.Tree(feature, value, is_cat, left, right, klass, counts))
    return ForestOracle(
        schema,
        trees,
        int(header["n_trees"]),
        int(header["max_depth"]),
        int(header["features_per_split"]),
        int(header["seed"]),
    )
