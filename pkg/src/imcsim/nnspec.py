"""Network/layer data model, shape arithmetic and network-description file ingestion.

Networks are described in a YAML file listing layers with explicit per-layer
input shapes (redundant on purpose: a mismatch between the declared shape and
the shape computed from the previous layer is an error, never silently fixed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import yaml


class NetworkParseError(ValueError):
    """Raised when a network document does not conform to the file schema."""


class NetworkValidationError(ValueError):
    """Raised when a parsed network violates a structural invariant."""


class ShapeError(ValueError):
    """Raised on tensor-shape / channel-count mismatches."""


class UnsupportedKindError(ValueError):
    """Raised when an operation does not apply to the given layer kind."""


class LayerKind(Enum):
    CONV2D = "conv"
    POINTWISE = "pointwise"
    DEPTHWISE = "depthwise"
    RESIDUAL = "residual"
    LINEAR = "linear"


#: Kinds whose weights form a dense (K^2*C_in) x C_out matrix on a crossbar.
MATRIX_KINDS = (LayerKind.CONV2D, LayerKind.POINTWISE, LayerKind.LINEAR)


@dataclass(frozen=True)
class TensorShape:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        for f in ("height", "width", "channels"):
            v = getattr(self, f)
            if not isinstance(v, int) or v < 1:
                raise ShapeError(f"TensorShape.{f} must be a positive integer, got {v!r}")

    @property
    def elements(self) -> int:
        return self.height * self.width * self.channels


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    kernel: int
    stride: int
    in_channels: int
    out_channels: int

    def __post_init__(self):
        if self.kernel < 1:
            raise NetworkValidationError(f"layer {self.name}: kernel must be >= 1")
        if self.stride < 1:
            raise NetworkValidationError(f"layer {self.name}: stride must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise NetworkValidationError(f"layer {self.name}: channel counts must be >= 1")
        if self.kind in (LayerKind.POINTWISE, LayerKind.LINEAR) and self.kernel != 1:
            raise NetworkValidationError(
                f"layer {self.name}: {self.kind.value} requires kernel=1, got {self.kernel}")
        if self.kind in (LayerKind.DEPTHWISE, LayerKind.RESIDUAL) \
                and self.in_channels != self.out_channels:
            raise NetworkValidationError(
                f"layer {self.name}: {self.kind.value} requires in_channels == out_channels "
                f"({self.in_channels} != {self.out_channels})")


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: TensorShape
    layers: tuple[LayerSpec, ...]
    layer_inputs: tuple[TensorShape, ...]
    residual_edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.layers) != len(self.layer_inputs):
            raise NetworkValidationError("layers and layer_inputs must align")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise NetworkValidationError(f"duplicate layer names: {dup}")

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)

    def input_of(self, name: str) -> TensorShape:
        for l, shp in zip(self.layers, self.layer_inputs):
            if l.name == name:
                return shp
        raise KeyError(name)


def output_shape(layer: LayerSpec, input: TensorShape) -> TensorShape:
    """Output tensor shape under "same" zero padding: ceil(H/stride) spatial dims."""
    if input.channels != layer.in_channels:
        raise ShapeError(
            f"layer {layer.name}: input has {input.channels} channels, "
            f"expected {layer.in_channels}")
    if layer.kind == LayerKind.RESIDUAL:
        return input
    return TensorShape(
        math.ceil(input.height / layer.stride),
        math.ceil(input.width / layer.stride),
        layer.out_channels,
    )


def mac_count(layer: LayerSpec, input: TensorShape) -> int:
    """MACs of one forward pass; residual additions count 1 each."""
    out = output_shape(layer, input)
    k2 = layer.kernel * layer.kernel
    if layer.kind == LayerKind.RESIDUAL:
        return input.elements
    if layer.kind == LayerKind.DEPTHWISE:
        return out.height * out.width * k2 * layer.in_channels
    return out.height * out.width * k2 * layer.in_channels * layer.out_channels


def op_count(layer: LayerSpec, input: TensorShape) -> int:
    """Operations: 2 per MAC; residual element additions count 1 op each."""
    macs = mac_count(layer, input)
    return macs if layer.kind == LayerKind.RESIDUAL else 2 * macs


def weight_matrix_dims(layer: LayerSpec) -> tuple[int, int]:
    """(rows, cols) of the im2col weight matrix: rows = K^2*C_in, cols = C_out."""
    if layer.kind not in MATRIX_KINDS:
        raise UnsupportedKindError(
            f"layer {layer.name}: no dense weight matrix for kind {layer.kind.value}")
    return (layer.kernel * layer.kernel * layer.in_channels, layer.out_channels)


_REQUIRED_LAYER_FIELDS = ("name", "kind", "cin", "cout")


def _parse_shape(obj, where: str) -> TensorShape:
    if not isinstance(obj, dict):
        raise NetworkParseError(f"{where}: expected a mapping with h/w/c")
    for f in ("h", "w", "c"):
        if f not in obj:
            raise NetworkParseError(f"{where}: missing field '{f}'")
        if not isinstance(obj[f], int):
            raise NetworkParseError(f"{where}: field '{f}' must be an integer")
    try:
        return TensorShape(obj["h"], obj["w"], obj["c"])
    except ShapeError as e:
        raise NetworkParseError(f"{where}: {e}") from e


def parse_network(document) -> NetworkSpec:
    """Parse a network description (YAML text, mapping, or file path)."""
    if isinstance(document, Path):
        document = document.read_text()
    if isinstance(document, str):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise NetworkParseError(f"invalid YAML: {e}") from e
    else:
        doc = document
    if not isinstance(doc, dict):
        raise NetworkParseError("network document must be a mapping")
    for f in ("input", "layers"):
        if f not in doc:
            raise NetworkParseError(f"missing top-level field '{f}'")

    net_name = doc.get("name", "network")
    input_shape = _parse_shape(doc["input"], "input")

    layers: list[LayerSpec] = []
    layer_inputs: list[TensorShape] = []
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise NetworkParseError("field 'layers' must be a non-empty list")
    for i, entry in enumerate(doc["layers"]):
        where = f"layers[{i}]"
        if not isinstance(entry, dict):
            raise NetworkParseError(f"{where}: expected a mapping")
        for f in _REQUIRED_LAYER_FIELDS:
            if f not in entry:
                raise NetworkParseError(f"{where}: missing field '{f}'")
        try:
            kind = LayerKind(entry["kind"])
        except ValueError:
            raise NetworkParseError(
                f"{where}: unknown kind '{entry['kind']}' "
                f"(expected one of {[k.value for k in LayerKind]})") from None
        try:
            layer = LayerSpec(
                name=str(entry["name"]),
                kind=kind,
                kernel=int(entry.get("k", 1)),
                stride=int(entry.get("stride", 1)),
                in_channels=int(entry["cin"]),
                out_channels=int(entry["cout"]),
            )
        except NetworkValidationError:
            raise
        if "input" in entry:
            shp = _parse_shape(entry["input"], f"{where}.input")
        else:
            shp = layer_inputs and output_shape(layers[-1], layer_inputs[-1]) or input_shape
        layers.append(layer)
        layer_inputs.append(shp)

    edges: list[tuple[str, str]] = []
    for i, edge in enumerate(doc.get("residuals", []) or []):
        if not (isinstance(edge, (list, tuple)) and len(edge) == 2):
            raise NetworkParseError(f"residuals[{i}]: expected a [source, dest] pair")
        edges.append((str(edge[0]), str(edge[1])))

    net = NetworkSpec(net_name, input_shape, tuple(layers), tuple(layer_inputs), tuple(edges))
    _validate(net)
    return net


def _validate(net: NetworkSpec) -> None:
    # Chain consistency: each declared input must match the previous layer's
    # output.  A spatial collapse to 1x1 before a linear layer is allowed
    # (implicit global pooling, which is not modeled as a layer).
    prev_out = net.input_shape
    for layer, declared in zip(net.layers, net.layer_inputs):
        if declared.channels != layer.in_channels:
            raise NetworkValidationError(
                f"layer {layer.name}: declared input channels {declared.channels} "
                f"!= cin {layer.in_channels}")
        if declared != prev_out:
            pooled = (layer.kind == LayerKind.LINEAR
                      and declared.height == declared.width == 1
                      and declared.channels == prev_out.channels)
            if not pooled:
                raise NetworkValidationError(
                    f"layer {layer.name}: declared input {declared} does not match "
                    f"previous output {prev_out}")
        prev_out = output_shape(layer, declared)

    names = {l.name for l in net.layers}
    for src, dst in net.residual_edges:
        for n in (src, dst):
            if n not in names:
                raise NetworkValidationError(f"residual edge references unknown layer '{n}'")
        s_out = output_shape(net.layer(src), net.input_of(src))
        d_out = output_shape(net.layer(dst), net.input_of(dst))
        if s_out != d_out:
            raise NetworkValidationError(
                f"residual edge {src} -> {dst}: output shapes differ ({s_out} vs {d_out})")


def serialize_network(net: NetworkSpec) -> str:
    """Render a NetworkSpec back to its YAML document form (parse round-trips)."""
    doc = {
        "name": net.name,
        "input": {"h": net.input_shape.height, "w": net.input_shape.width,
                  "c": net.input_shape.channels},
        "layers": [
            {"name": l.name, "kind": l.kind.value, "k": l.kernel, "stride": l.stride,
             "cin": l.in_channels, "cout": l.out_channels,
             "input": {"h": s.height, "w": s.width, "c": s.channels}}
            for l, s in zip(net.layers, net.layer_inputs)
        ],
    }
    if net.residual_edges:
        doc["residuals"] = [list(e) for e in net.residual_edges]
    return yaml.safe_dump(doc, sort_keys=False)


def bundled_network_path(name: str) -> Path:
    """Path of a network description shipped with the package."""
    p = Path(__file__).parent / "data" / f"{name}.yaml"
    if not p.exists():
        raise FileNotFoundError(f"no bundled network '{name}'")
    return p


def load_bundled_network(name: str) -> NetworkSpec:
    return parse_network(bundled_network_path(name))
