"""Text container for trained models.

The format is a UTF-8 file of header lines followed by array lines:

    key=value                  (header: format tag, arch, hyper, metadata)
    name shape d1,d2[,d3] values v1 v2 ...

Floats print with 17 significant digits, so a save/load round trip
reproduces every parameter bit-exactly and loaded models score
identically to the models that produced them.
"""

from __future__ import annotations

import io

import numpy as np

from .arch import ArchSpec, HyperConfig, build_model, parse_spec, serialize_spec
from .errors import DataError

FORMAT_TAG = "seqbind-model-1"


def _array_line(name, arr):
    dims = ",".join(str(d) for d in arr.shape)
    values = " ".join(f"{v:.17g}" for v in arr.reshape(-1))
    return f"{name} shape {dims} values {values}"


def _parse_array_line(line):
    name, rest = line.split(" shape ", 1)
    dims, values = rest.split(" values ", 1)
    shape = tuple(int(d) for d in dims.split(","))
    arr = np.array([float(v) for v in values.split()])
    if arr.size != int(np.prod(shape)):
        raise DataError(f"array {name}: expected {np.prod(shape)} values, got {arr.size}")
    return name, arr.reshape(shape)


def save_model(model, path):
    buf = io.StringIO()
    buf.write(f"format={FORMAT_TAG}\n")
    for line in serialize_spec(model.arch).splitlines():
        buf.write(f"arch.{line}\n")
    for key, value in model.hyper.to_dict().items():
        buf.write(f"hyper.{key}={value}\n")
    buf.write(f"fixed_length={model.fixed_length}\n")
    buf.write(f"step_count={model.step_count}\n")
    buf.write(f"has_embedding={int(model.embedding is not None)}\n")
    if model.embedding is not None:
        buf.write(_array_line("embed.table", model.embedding) + "\n")
    for p in model.parameters():
        buf.write(_array_line(p.name, p.value) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_model(path):
    headers = {}
    arrays = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            head = line.split(" ", 1)[0]
            if "=" in head:
                key, value = line.split("=", 1)
                headers[key] = value
            else:
                name, arr = _parse_array_line(line)
                arrays[name] = arr
    if headers.get("format") != FORMAT_TAG:
        raise DataError(f"{path}: not a {FORMAT_TAG} container")
    spec_text = "\n".join(f"{k[len('arch.'):]}={v}" for k, v in headers.items()
                          if k.startswith("arch."))
    spec = parse_spec(spec_text)
    hyper = HyperConfig.from_dict({k[len("hyper."):]: v for k, v in headers.items()
                                   if k.startswith("hyper.")})
    fixed_length = int(headers["fixed_length"])
    embedding = arrays.pop("embed.table", None)
    model = build_model(spec, hyper, fixed_length, seed=0, embedding=embedding)
    model.step_count = int(headers.get("step_count", 0))
    for p in model.parameters():
        if p.name not in arrays:
            raise DataError(f"{path}: missing array {p.name}")
        if p.value.shape != arrays[p.name].shape:
            raise DataError(f"{path}: array {p.name} has shape "
                            f"{arrays[p.name].shape}, expected {p.value.shape}")
        p.value[...] = arrays[p.name]
    return model
