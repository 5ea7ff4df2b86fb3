"""Minimal ONNX interchange support: protobuf codec plus a numpy executor.

Reads and writes standard ONNX model files (default opset 13) without the
onnx/onnxruntime packages, covering the operator subset needed for small
encoder-decoder segmentation networks:

    Identity, Conv, InstanceNormalization, Relu, LeakyRelu, Sigmoid,
    Add, Concat, Resize (nearest, integer upscale)

Files written here load in any compliant ONNX runtime; files produced by
other exporters load here as long as they stick to that subset (tensors
are expected as raw or float data, opset domain must be the default one).
Layout is NCHW / NCDHW with a leading batch axis.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelLoadError

# TensorProto.DataType values
_FLOAT = 1
_INT64 = 7

_SUPPORTED_OPS = {
    "Identity",
    "Conv",
    "InstanceNormalization",
    "Relu",
    "LeakyRelu",
    "Sigmoid",
    "Add",
    "Concat",
    "Resize",
}


# ---------------------------------------------------------------------------
# protobuf wire format primitives


def _varint(n):
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(data, i):
    result = 0
    shift = 0
    while True:
        b = data[i]
        i += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, i
        shift += 7


def _f_varint(fieldno, value):
    return _varint(fieldno << 3 | 0) + _varint(value)


def _f_bytes(fieldno, payload):
    return _varint(fieldno << 3 | 2) + _varint(len(payload)) + payload


def _f_string(fieldno, s):
    return _f_bytes(fieldno, s.encode("utf-8"))


def _f_float(fieldno, value):
    return _varint(fieldno << 3 | 5) + struct.pack("<f", value)


def _f_packed_int64(fieldno, values):
    payload = b"".join(_varint(v & 0xFFFFFFFFFFFFFFFF) for v in values)
    return _f_bytes(fieldno, payload)


def _iter_fields(data):
    i = 0
    n = len(data)
    while i < n:
        tag, i = _read_varint(data, i)
        fieldno, wt = tag >> 3, tag & 7
        if wt == 0:
            value, i = _read_varint(data, i)
        elif wt == 1:
            value = data[i : i + 8]
            i += 8
        elif wt == 2:
            ln, i = _read_varint(data, i)
            value = data[i : i + ln]
            i += ln
        elif wt == 5:
            value = data[i : i + 4]
            i += 4
        else:
            raise ModelLoadError(f"unsupported protobuf wire type {wt}")
        yield fieldno, wt, value


# ---------------------------------------------------------------------------
# writer


@dataclass
class Node:
    op_type: str
    inputs: list
    outputs: list
    attrs: dict = field(default_factory=dict)
    name: str = ""


def _encode_tensor(name, array):
    a = np.asarray(array)
    if a.dtype == np.float32:
        dtype = _FLOAT
    elif a.dtype == np.int64:
        dtype = _INT64
    else:
        raise ValueError(f"initializer {name!r} must be float32 or int64")
    out = _f_packed_int64(1, list(a.shape))
    out += _f_varint(2, dtype)
    out += _f_string(8, name)
    out += _f_bytes(9, np.ascontiguousarray(a).tobytes())  # raw_data, LE
    return out


def _encode_attr(name, value):
    out = _f_string(1, name)
    if isinstance(value, bool):
        raise ValueError("boolean attributes are not a thing in ONNX")
    if isinstance(value, int):
        out += _f_varint(3, value & 0xFFFFFFFFFFFFFFFF)
        out += _f_varint(20, 2)  # INT
    elif isinstance(value, float):
        out += _f_float(2, value)
        out += _f_varint(20, 1)  # FLOAT
    elif isinstance(value, str):
        out += _f_bytes(4, value.encode("utf-8"))
        out += _f_varint(20, 3)  # STRING
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        out += _f_packed_int64(8, list(value))
        out += _f_varint(20, 7)  # INTS
    else:
        raise ValueError(f"unsupported attribute value for {name!r}: {value!r}")
    return out


def _encode_node(node):
    out = b"".join(_f_string(1, s) for s in node.inputs)
    out += b"".join(_f_string(2, s) for s in node.outputs)
    if node.name:
        out += _f_string(3, node.name)
    out += _f_string(4, node.op_type)
    out += b"".join(
        _f_bytes(5, _encode_attr(k, v)) for k, v in sorted(node.attrs.items())
    )
    return out


def _encode_value_info(name, shape):
    dims = b""
    for d in shape:
        if d is None or isinstance(d, str):
            dim = _f_string(2, d if isinstance(d, str) else "dyn")
        else:
            dim = _f_varint(1, int(d))
        dims += _f_bytes(1, dim)
    tensor = _f_varint(1, _FLOAT) + _f_bytes(2, dims)
    typ = _f_bytes(1, tensor)
    return _f_string(1, name) + _f_bytes(2, typ)


def build_model(nodes, initializers, inputs, outputs, opset=13, producer="vesselmend"):
    """Serialize a graph to ONNX ModelProto bytes.

    ``inputs``/``outputs`` are (name, shape) pairs where shape entries may
    be ints, strings (symbolic) or None (anonymous dynamic).
    """
    graph = b"".join(_f_bytes(1, _encode_node(n)) for n in nodes)
    graph += _f_string(2, "net")
    graph += b"".join(
        _f_bytes(5, _encode_tensor(k, v)) for k, v in initializers.items()
    )
    graph += b"".join(_f_bytes(11, _encode_value_info(n, s)) for n, s in inputs)
    graph += b"".join(_f_bytes(12, _encode_value_info(n, s)) for n, s in outputs)

    opset_import = _f_string(1, "") + _f_varint(2, opset)
    model = _f_varint(1, 8)  # ir_version
    model += _f_string(2, producer)
    model += _f_bytes(7, graph)
    model += _f_bytes(8, opset_import)
    return model


def save_model(path, nodes, initializers, inputs, outputs, opset=13):
    with open(path, "wb") as f:
        f.write(build_model(nodes, initializers, inputs, outputs, opset))


# ---------------------------------------------------------------------------
# reader


def _parse_tensor(data):
    dims = []
    dtype = _FLOAT
    name = ""
    raw = None
    floats = []
    int64s = []
    for fieldno, wt, value in _iter_fields(data):
        if fieldno == 1:
            if wt == 2:  # packed
                i = 0
                while i < len(value):
                    v, i = _read_varint(value, i)
                    dims.append(v)
            else:
                dims.append(value)
        elif fieldno == 2:
            dtype = value
        elif fieldno == 4:
            if wt == 2:
                floats.extend(np.frombuffer(value, dtype="<f4").tolist())
            else:
                floats.append(struct.unpack("<f", value)[0])
        elif fieldno == 7:
            if wt == 2:
                i = 0
                while i < len(value):
                    v, i = _read_varint(value, i)
                    int64s.append(v)
            else:
                int64s.append(value)
        elif fieldno == 8:
            name = value.decode("utf-8")
        elif fieldno == 9:
            raw = value
    shape = tuple(int(d) for d in dims)
    if dtype == _FLOAT:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
        else:
            arr = np.asarray(floats, dtype=np.float32).reshape(shape)
    elif dtype == _INT64:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i8").reshape(shape).astype(np.int64)
        else:
            arr = np.asarray(int64s, dtype=np.int64).reshape(shape)
    else:
        raise ModelLoadError(f"unsupported tensor data type {dtype} for {name!r}")
    return name, arr


def _parse_attr(data):
    name = ""
    fields = {}
    for fieldno, wt, value in _iter_fields(data):
        if fieldno == 1:
            name = value.decode("utf-8")
        elif fieldno == 2:
            fields["f"] = struct.unpack("<f", value)[0]
        elif fieldno == 3:
            fields["i"] = _signed(value)
        elif fieldno == 4:
            fields["s"] = value.decode("utf-8")
        elif fieldno == 5:
            fields["t"] = _parse_tensor(value)[1]
        elif fieldno == 7:
            if wt == 2 and len(value) % 4 == 0:
                fields.setdefault("floats", []).extend(
                    np.frombuffer(value, dtype="<f4").tolist()
                )
            else:
                fields.setdefault("floats", []).append(struct.unpack("<f", value)[0])
        elif fieldno == 8:
            ints = fields.setdefault("ints", [])
            if wt == 2:
                i = 0
                while i < len(value):
                    v, i = _read_varint(value, i)
                    ints.append(_signed(v))
            else:
                ints.append(_signed(value))
        elif fieldno == 20:
            fields["type"] = value
    order = {2: "i", 1: "f", 3: "s", 7: "ints", 6: "floats", 4: "t"}
    key = order.get(fields.get("type"))
    if key is not None and key in fields:
        return name, fields[key]
    for key in ("i", "f", "s", "ints", "floats", "t"):
        if key in fields:
            return name, fields[key]
    return name, None


def _signed(v):
    # protobuf int64 arrives as two's complement varint
    return v - (1 << 64) if v >= (1 << 63) else v


def _parse_node(data):
    node = Node(op_type="", inputs=[], outputs=[])
    for fieldno, _, value in _iter_fields(data):
        if fieldno == 1:
            node.inputs.append(value.decode("utf-8"))
        elif fieldno == 2:
            node.outputs.append(value.decode("utf-8"))
        elif fieldno == 3:
            node.name = value.decode("utf-8")
        elif fieldno == 4:
            node.op_type = value.decode("utf-8")
        elif fieldno == 5:
            k, v = _parse_attr(value)
            node.attrs[k] = v
        elif fieldno == 7 and value not in (b"", b"ai.onnx"):
            raise ModelLoadError(f"unsupported op domain {value!r}")
    return node


def _parse_value_info(data):
    name = ""
    for fieldno, _, value in _iter_fields(data):
        if fieldno == 1:
            name = value.decode("utf-8")
    return name


@dataclass
class OnnxModel:
    nodes: list
    initializers: dict
    input_names: list
    output_names: list

    def run(self, feeds):
        return run_graph(self, feeds)


def parse_model(data):
    graph = None
    for fieldno, _, value in _iter_fields(data):
        if fieldno == 7:
            graph = value
    if graph is None:
        raise ModelLoadError("no graph in model file")
    nodes, initializers, inputs, outputs = [], {}, [], []
    for fieldno, _, value in _iter_fields(graph):
        if fieldno == 1:
            nodes.append(_parse_node(value))
        elif fieldno == 5:
            name, arr = _parse_tensor(value)
            initializers[name] = arr
        elif fieldno == 11:
            inputs.append(_parse_value_info(value))
        elif fieldno == 12:
            outputs.append(_parse_value_info(value))
    for node in nodes:
        if node.op_type not in _SUPPORTED_OPS:
            raise ModelLoadError(f"unsupported operator {node.op_type!r}")
    feed_names = [n for n in inputs if n not in initializers]
    return OnnxModel(nodes, initializers, feed_names, outputs)


def load_model(path):
    """Parse an ONNX file; raises :class:`ModelLoadError` on any defect."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model file {path}: {exc}") from exc
    try:
        return parse_model(data)
    except ModelLoadError:
        raise
    except Exception as exc:
        raise ModelLoadError(f"malformed model file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# executor


def _op_conv(node, x, w, b=None):
    nsp = x.ndim - 2
    strides = list(node.attrs.get("strides", [1] * nsp))
    pads = list(node.attrs.get("pads", [0] * (2 * nsp)))
    dilations = list(node.attrs.get("dilations", [1] * nsp))
    group = int(node.attrs.get("group", 1))
    if any(d != 1 for d in dilations) or group != 1:
        raise ModelLoadError("Conv with dilation or groups is not supported")
    pad_width = [(0, 0), (0, 0)] + [(pads[k], pads[k + nsp]) for k in range(nsp)]
    xp = np.pad(x, pad_width)
    win = np.lib.stride_tricks.sliding_window_view(
        xp, w.shape[2:], axis=tuple(range(2, 2 + nsp))
    )
    slicer = (slice(None), slice(None)) + tuple(
        slice(None, None, s) for s in strides
    )
    win = win[slicer]
    if nsp == 2:
        y = np.einsum("nchwij,mcij->nmhw", win, w)
    elif nsp == 3:
        y = np.einsum("ncdhwijk,mcijk->nmdhw", win, w)
    else:
        raise ModelLoadError(f"Conv over {nsp} spatial dims is not supported")
    if b is not None:
        y = y + b.reshape((1, -1) + (1,) * nsp)
    return np.ascontiguousarray(y, dtype=np.float32)


def _op_instance_norm(node, x, scale, bias):
    eps = float(node.attrs.get("epsilon", 1e-5))
    axes = tuple(range(2, x.ndim))
    mean = x.mean(axis=axes, keepdims=True)
    var = x.var(axis=axes, keepdims=True)
    shape = (1, -1) + (1,) * (x.ndim - 2)
    y = (x - mean) / np.sqrt(var + eps)
    return (y * scale.reshape(shape) + bias.reshape(shape)).astype(np.float32)


def _op_resize(node, x, *rest):
    mode = node.attrs.get("mode", "nearest")
    if mode != "nearest":
        raise ModelLoadError(f"Resize mode {mode!r} is not supported")
    scales = None
    for arr in rest:
        if arr is not None and arr.size == x.ndim and arr.dtype != np.int64:
            scales = np.asarray(arr, dtype=np.float64)
    if scales is None:
        raise ModelLoadError("Resize requires explicit scales")
    y = x
    for axis, s in enumerate(scales):
        k = int(round(s))
        if abs(s - k) > 1e-6 or k < 1:
            raise ModelLoadError(f"Resize scale {s} is not an integer upscale")
        if k > 1:
            y = np.repeat(y, k, axis=axis)
    return y.astype(np.float32)


def run_graph(model, feeds):
    """Execute the graph on numpy inputs; returns outputs by name."""
    values = dict(model.initializers)
    values.update(feeds)
    for node in model.nodes:
        for n in node.inputs:
            if n and n not in values:
                raise ModelLoadError(f"value {n!r} used before it is produced")
        args = [values[n] if n else None for n in node.inputs]
        op = node.op_type
        if op == "Identity":
            out = np.asarray(args[0], dtype=np.float32)
        elif op == "Relu":
            out = np.maximum(args[0], 0.0).astype(np.float32)
        elif op == "LeakyRelu":
            alpha = float(node.attrs.get("alpha", 0.01))
            x = args[0]
            out = np.where(x >= 0, x, alpha * x).astype(np.float32)
        elif op == "Sigmoid":
            out = (1.0 / (1.0 + np.exp(-args[0].astype(np.float64)))).astype(
                np.float32
            )
        elif op == "Add":
            out = (args[0] + args[1]).astype(np.float32)
        elif op == "Concat":
            axis = int(node.attrs["axis"])
            out = np.concatenate(args, axis=axis).astype(np.float32)
        elif op == "Conv":
            out = _op_conv(node, *args)
        elif op == "InstanceNormalization":
            out = _op_instance_norm(node, *args)
        elif op == "Resize":
            out = _op_resize(node, *args)
        else:
            raise ModelLoadError(f"unsupported operator {op!r}")
        values[node.outputs[0]] = out
    missing = [n for n in model.output_names if n not in values]
    if missing:
        raise ModelLoadError(f"graph outputs never produced: {missing}")
    return {n: values[n] for n in model.output_names}
