"""Binary model files: 4-byte magic, u16 version, dims, little-endian f64.

Each classifier gets its own magic so ``load_model`` can dispatch.  The
files also carry the wavelet depth the training pipeline used (0 for
models that consume raw series), so evaluation can rebuild identical
features without side channels.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .gnb import GaussianNaiveBayesActivityClassifier
from .lstm import LstmActivityClassifier
from .tree import DecisionTreeActivityClassifier, _Node

MAGIC_TREE = b"CSTR"
MAGIC_GNB = b"CSNB"
MAGIC_LSTM = b"CSLS"
FORMAT_VERSION = 1

_PREAMBLE = struct.Struct("<4sHI")  # magic, version, pipeline wavelet levels


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.offset = 0
        self.path = path

    def unpack(self, fmt: str) -> tuple:
        s = struct.Struct(fmt)
        if self.offset + s.size > len(self.data):
            raise ValueError(f"{self.path}: truncated model file")
        out = s.unpack_from(self.data, self.offset)
        self.offset += s.size
        return out

    def array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        end = self.offset + 8 * count
        if end > len(self.data):
            raise ValueError(f"{self.path}: truncated model file")
        out = (
            np.frombuffer(self.data, dtype="<f8", count=count, offset=self.offset)
            .reshape(shape)
            .astype(np.float64)
        )
        self.offset = end
        return out

    def strings(self) -> list[str]:
        (count,) = self.unpack("<I")
        out = []
        for _ in range(count):
            (length,) = self.unpack("<I")
            if self.offset + length > len(self.data):
                raise ValueError(f"{self.path}: truncated model file")
            out.append(self.data[self.offset : self.offset + length].decode("utf-8"))
            self.offset += length
        return out

    def done(self) -> None:
        if self.offset != len(self.data):
            raise ValueError(
                f"{self.path}: {len(self.data) - self.offset} trailing bytes"
            )


def _pack_strings(items) -> bytes:
    parts = [struct.pack("<I", len(items))]
    for item in items:
        raw = str(item).encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    return b"".join(parts)


def _pack_array(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


# -- decision tree -------------------------------------------------------

_NODE = struct.Struct("<idiii")  # class_index, threshold, feature, left, right


def _flatten_tree(root: _Node) -> list[tuple]:
    nodes: list[tuple] = []

    def visit(node: _Node) -> int:
        idx = len(nodes)
        nodes.append(None)
        if node.is_leaf:
            nodes[idx] = (node.class_index, 0.0, -1, -1, -1)
        else:
            left = visit(node.left)
            right = visit(node.right)
            nodes[idx] = (node.class_index, node.threshold, node.feature, left, right)
        return idx

    visit(root)
    return nodes


def _tree_payload(model: DecisionTreeActivityClassifier) -> bytes:
    nodes = _flatten_tree(model.root_)
    parts = [
        struct.pack("<I", model.n_features_in_),
        _pack_strings(model.classes_),
        struct.pack("<I", len(nodes)),
    ]
    parts.extend(_NODE.pack(*node) for node in nodes)
    return b"".join(parts)


def _tree_from(reader: _Reader) -> DecisionTreeActivityClassifier:
    (n_features,) = reader.unpack("<I")
    classes = reader.strings()
    (n_nodes,) = reader.unpack("<I")
    rows = [reader.unpack(_NODE.format) for _ in range(n_nodes)]

    def build(idx: int) -> _Node:
        class_index, threshold, feature, left, right = rows[idx]
        node = _Node(class_index=class_index, n_samples=0)
        if feature >= 0:
            node.feature = feature
            node.threshold = threshold
            node.left = build(left)
            node.right = build(right)
        return node

    model = DecisionTreeActivityClassifier()
    model.classes_ = np.array(classes)
    model.n_features_in_ = n_features
    model.root_ = build(0)
    model.depth_ = model._depth(model.root_)
    model.n_leaves_ = model._leaves(model.root_)
    return model


# -- gaussian naive bayes ------------------------------------------------


def _gnb_payload(model: GaussianNaiveBayesActivityClassifier) -> bytes:
    return b"".join(
        [
            struct.pack("<I", model.n_features_in_),
            _pack_strings(model.classes_),
            struct.pack("<d", model.epsilon_),
            _pack_array(model.priors_),
            _pack_array(model.means_),
            _pack_array(model.vars_),
        ]
    )


def _gnb_from(reader: _Reader) -> GaussianNaiveBayesActivityClassifier:
    (n_features,) = reader.unpack("<I")
    classes = reader.strings()
    (epsilon,) = reader.unpack("<d")
    k = len(classes)
    model = GaussianNaiveBayesActivityClassifier()
    model.classes_ = np.array(classes)
    model.n_features_in_ = n_features
    model.epsilon_ = epsilon
    model.priors_ = reader.array((k,))
    model.means_ = reader.array((k, n_features))
    model.vars_ = reader.array((k, n_features))
    return model


# -- lstm ----------------------------------------------------------------


def _lstm_payload(model: LstmActivityClassifier) -> bytes:
    h = model.hidden_size
    d = model.n_features_in_
    return b"".join(
        [
            struct.pack("<II", d, h),
            _pack_strings(model.classes_),
            _pack_array(model.input_mean_),
            _pack_array(model.input_std_),
            _pack_array(model.params_["W"]),
            _pack_array(model.params_["b"]),
            _pack_array(model.params_["V"]),
            _pack_array(model.params_["c"]),
        ]
    )


def _lstm_from(reader: _Reader) -> LstmActivityClassifier:
    d, h = reader.unpack("<II")
    classes = reader.strings()
    k = len(classes)
    model = LstmActivityClassifier(hidden_size=h)
    model.classes_ = np.array(classes)
    model.n_features_in_ = d
    model.input_mean_ = reader.array((d,))
    model.input_std_ = reader.array((d,))
    model.params_ = {
        "W": reader.array((4 * h, d + h)),
        "b": reader.array((4 * h,)),
        "V": reader.array((k, h)),
        "c": reader.array((k,)),
    }
    model.loss_history_ = []
    return model


# -- public API ----------------------------------------------------------

_SAVERS = [
    (DecisionTreeActivityClassifier, MAGIC_TREE, _tree_payload),
    (GaussianNaiveBayesActivityClassifier, MAGIC_GNB, _gnb_payload),
    (LstmActivityClassifier, MAGIC_LSTM, _lstm_payload),
]

_LOADERS = {
    MAGIC_TREE: _tree_from,
    MAGIC_GNB: _gnb_from,
    MAGIC_LSTM: _lstm_from,
}


def save_model(path, model, levels: int = 0) -> None:
    """Write a fitted classifier; ``levels`` records the feature pipeline
    (wavelet depth for feature models, 0 for raw-series models)."""
    for cls, magic, payload in _SAVERS:
        if isinstance(model, cls):
            data = _PREAMBLE.pack(magic, FORMAT_VERSION, levels) + payload(model)
            Path(path).write_bytes(data)
            return
    raise TypeError(f"cannot serialize {type(model).__name__}")


def load_model(path):
    """Read any model file; returns (model, levels)."""
    data = Path(path).read_bytes()
    if len(data) < _PREAMBLE.size:
        raise ValueError(f"{path}: too short for a model file")
    magic, version, levels = _PREAMBLE.unpack_from(data)
    if magic not in _LOADERS:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    reader = _Reader(data, path)
    reader.offset = _PREAMBLE.size
    model = _LOADERS[magic](reader)
    reader.done()
    return model, levels
