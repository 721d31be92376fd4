"""Model, tensor, and scheme file formats.

A model file is a human-readable manifest followed by raw parameter blobs:

    line 1: format tag "circconv-model/1"
    line 2: manifest byte length (decimal)
    manifest: UTF-8 JSON describing precision and the layer list
    payload: one little-endian scalar blob per parameter, in manifest order

Scalars are stored as float64 by default ("f64"); "f32" stores float32,
which round-trips exactly for the values actually stored. Loading is pure
data: nothing in the file is ever executed, and every shape and partition
declared by the manifest is validated before the network is returned.

Tensor files use the same layout with tag "circconv-tensor/1" and a single
blob. A compression-scheme file is a JSON object mapping layer or block
names to integer ratios.
"""

import json

import numpy as np

from .circulant import CirculantBaseTensor, PartitionConfig
from .convops import ConvGeometry
from .errors import ModelFormatError
from .nn import (
    CircConvLayer,
    DenseConvLayer,
    FullyConnected,
    GlobalAveragePool,
    Network,
    ReLU,
)

MODEL_MAGIC = "circconv-model/1"
TENSOR_MAGIC = "circconv-tensor/1"

_DTYPES = {"f64": np.dtype("<f8"), "f32": np.dtype("<f4")}


def _geometry_meta(g):
    return {"pad": list(g.pad), "stride": g.stride}


def _geometry_from_meta(meta, where):
    try:
        pad = tuple(int(v) for v in meta["pad"])
        stride = int(meta["stride"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: bad geometry {meta!r}") from exc
    return ConvGeometry(pad=pad, stride=stride)


def _layer_manifest(layer):
    if isinstance(layer, CircConvLayer):
        cfg = layer.base.config
        k1, k2 = layer.base.kernel_size
        meta = {
            "kind": "circconv",
            "kernel": [k1, k2],
            "c_in": cfg.c_in,
            "c_out": cfg.c_out,
            "n": cfg.n,
            **_geometry_meta(layer.geometry),
        }
        arrays = [("base", layer.base.base), ("bias", layer.bias)]
    elif isinstance(layer, DenseConvLayer):
        meta = {
            "kind": "conv",
            "kernel": [layer.w.shape[0], layer.w.shape[1]],
            "c_in": layer.w.shape[2],
            "c_out": layer.w.shape[3],
            **_geometry_meta(layer.geometry),
        }
        arrays = [("w", layer.w), ("bias", layer.bias)]
    elif isinstance(layer, ReLU):
        meta, arrays = {"kind": "relu"}, []
    elif isinstance(layer, GlobalAveragePool):
        meta, arrays = {"kind": "gap"}, []
    elif isinstance(layer, FullyConnected):
        meta = {
            "kind": "fc",
            "c_in": layer.matrix.shape[0],
            "c_out": layer.matrix.shape[1],
        }
        arrays = [("matrix", layer.matrix), ("bias", layer.bias)]
    else:
        raise ModelFormatError(f"cannot serialize layer type {type(layer).__name__}")
    meta["params"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    return meta, arrays


def save_model(net, path, precision="f64"):
    """Write a network; load_model(path) restores it bit-exactly at f64."""
    if precision not in _DTYPES:
        raise ModelFormatError(f"unknown precision {precision!r}")
    dtype = _DTYPES[precision]
    manifests, blobs = [], []
    for layer in net.layers:
        meta, arrays = _layer_manifest(layer)
        manifests.append(meta)
        blobs.extend(np.ascontiguousarray(a, dtype=dtype).tobytes() for _, a in arrays)
    manifest = json.dumps(
        {
            "format": MODEL_MAGIC,
            "precision": precision,
            "endianness": "little",
            "layers": manifests,
        },
        indent=1,
    ).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC.encode() + b"\n")
            fh.write(str(len(manifest)).encode() + b"\n")
            fh.write(manifest)
            for blob in blobs:
                fh.write(blob)
    except OSError as exc:
        raise OSError(f"cannot write model file {path}: {exc}") from exc


def _read_header(fh, magic, path):
    line = fh.readline()
    if line.rstrip(b"\n").decode("utf-8", "replace") != magic:
        raise ModelFormatError(
            f"{path}: version mismatch, expected {magic!r}, got {line[:40]!r}"
        )
    try:
        nbytes = int(fh.readline().strip())
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad manifest length line") from exc
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise ModelFormatError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: manifest is not valid JSON: {exc}") from exc
    if manifest.get("format") != magic:
        raise ModelFormatError(f"{path}: manifest format field mismatch")
    return manifest


def _read_blob(fh, shape, dtype, where):
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    nbytes = count * dtype.itemsize
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise ModelFormatError(
            f"truncated blob for {where}: expected {nbytes} bytes, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(shape)


def _expect_params(meta, names, where):
    declared = [p.get("name") for p in meta.get("params", [])]
    if declared != list(names):
        raise ModelFormatError(
            f"{where}: expected params {list(names)}, manifest declares {declared}"
        )


def load_model(path):
    """Parse and validate a model file; returns a Network.

    Raises ModelFormatError naming the offending field on version mismatch,
    truncated blobs, or shape/partition inconsistencies.
    """
    with open(path, "rb") as fh:
        manifest = _read_header(fh, MODEL_MAGIC, path)
        precision = manifest.get("precision")
        if precision not in _DTYPES:
            raise ModelFormatError(f"{path}: unknown precision {precision!r}")
        dtype = _DTYPES[precision]
        layers = []
        for i, meta in enumerate(manifest.get("layers", [])):
            where = f"{path}: layer {i}"
            kind = meta.get("kind")
            shapes = {
                p.get("name"): tuple(p.get("shape", ()))
                for p in meta.get("params", [])
            }
            if kind == "circconv":
                _expect_params(meta, ("base", "bias"), where)
                try:
                    cfg = PartitionConfig(
                        n=int(meta["n"]), c_in=int(meta["c_in"]), c_out=int(meta["c_out"])
                    )
                    kernel = tuple(int(v) for v in meta["kernel"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ModelFormatError(f"{where}: bad circconv fields") from exc
                want = (kernel[0], kernel[1], cfg.padded_in, cfg.s)
                if shapes["base"] != want:
                    raise ModelFormatError(
                        f"{where}: base shape {shapes['base']} does not tile "
                        f"N={cfg.n} over channels ({cfg.c_in}, {cfg.c_out}); "
                        f"expected {want}"
                    )
                if shapes["bias"] != (cfg.c_out,):
                    raise ModelFormatError(f"{where}: bias shape {shapes['bias']}")
                geometry = _geometry_from_meta(meta, where)
                if geometry.stride != 1:
                    raise ModelFormatError(
                        f"{where}: circconv layers require stride 1, "
                        f"got {geometry.stride}"
                    )
                base = _read_blob(fh, shapes["base"], dtype, f"{where} 'base'")
                bias = _read_blob(fh, shapes["bias"], dtype, f"{where} 'bias'")
                layers.append(
                    CircConvLayer(
                        CirculantBaseTensor(base, cfg), bias=bias, geometry=geometry
                    )
                )
            elif kind == "conv":
                _expect_params(meta, ("w", "bias"), where)
                try:
                    kernel = tuple(int(v) for v in meta["kernel"])
                    c_in, c_out = int(meta["c_in"]), int(meta["c_out"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise ModelFormatError(f"{where}: bad conv fields") from exc
                want = (kernel[0], kernel[1], c_in, c_out)
                if shapes["w"] != want:
                    raise ModelFormatError(
                        f"{where}: kernel shape {shapes['w']} does not match {want}"
                    )
                w = _read_blob(fh, shapes["w"], dtype, f"{where} 'w'")
                bias = _read_blob(fh, shapes["bias"], dtype, f"{where} 'bias'")
                layers.append(
                    DenseConvLayer(w, bias=bias, geometry=_geometry_from_meta(meta, where))
                )
            elif kind == "relu":
                layers.append(ReLU())
            elif kind == "gap":
                layers.append(GlobalAveragePool())
            elif kind == "fc":
                _expect_params(meta, ("matrix", "bias"), where)
                want = (int(meta["c_in"]), int(meta["c_out"]))
                if shapes["matrix"] != want:
                    raise ModelFormatError(
                        f"{where}: fc matrix shape {shapes['matrix']} != {want}"
                    )
                matrix = _read_blob(fh, shapes["matrix"], dtype, f"{where} 'matrix'")
                bias = _read_blob(fh, shapes["bias"], dtype, f"{where} 'bias'")
                layers.append(FullyConnected(matrix, bias=bias))
            else:
                raise ModelFormatError(f"{where}: unknown layer kind {kind!r}")
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError(f"{path}: trailing data after payload")
    return Network(layers)


def save_tensor(path, arr, precision="f64"):
    """Write one array in the tensor file format."""
    if precision not in _DTYPES:
        raise ModelFormatError(f"unknown precision {precision!r}")
    arr = np.asarray(arr, dtype=np.float64)
    manifest = json.dumps(
        {
            "format": TENSOR_MAGIC,
            "precision": precision,
            "endianness": "little",
            "shape": list(arr.shape),
        }
    ).encode()
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC.encode() + b"\n")
        fh.write(str(len(manifest)).encode() + b"\n")
        fh.write(manifest)
        fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[precision]).tobytes())


def load_tensor(path):
    with open(path, "rb") as fh:
        manifest = _read_header(fh, TENSOR_MAGIC, path)
        precision = manifest.get("precision")
        if precision not in _DTYPES:
            raise ModelFormatError(f"{path}: unknown precision {precision!r}")
        shape = tuple(int(v) for v in manifest.get("shape", ()))
        arr = _read_blob(fh, shape, _DTYPES[precision], f"{path}: tensor")
        if fh.read(1):
            raise ModelFormatError(f"{path}: trailing data after payload")
    return arr


def load_scheme_file(path):
    """JSON object mapping layer/block names to integer ratios."""
    try:
        with open(path, "rb") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: scheme file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not data:
        raise ModelFormatError(f"{path}: scheme file must map names to ratios")
    out = {}
    for name, ratio in data.items():
        if not isinstance(ratio, int) or ratio < 1:
            raise ModelFormatError(
                f"{path}: ratio for {name!r} must be a positive integer, got {ratio!r}"
            )
        out[str(name)] = ratio
    return out
