"""Plain-text checkpoints.

Layout::

    extvae-checkpoint 1
    kind radius_vae
    meta alpha 1.5
    ...
    array enc.0.W 2 1 5
    0 0 0 0 0
    ...
    end

Floats are written with 17 significant digits, so parsing and rewriting a
file reproduces it byte for byte and every weight round-trips exactly.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .angular_vae import AngularVaeModel
from .autodiff import DenseNet, Layer
from .baselines import StdVaeModel
from .errors import DataError
from .radius_vae import RadiusVaeModel

FORMAT_VERSION = 1
MAGIC = "extvae-checkpoint"
KINDS = ("radius_vae", "angular_vae", "stdvae")


class CheckpointError(DataError):
    pass


def fmt_float(x) -> str:
    return "%.17g" % float(x)


@dataclass
class Checkpoint:
    kind: str
    meta: Dict[str, str] = field(default_factory=dict)
    arrays: List[Tuple[str, np.ndarray]] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def to_text(self) -> str:
        lines = [f"{MAGIC} {self.version}", f"kind {self.kind}"]
        for k, v in self.meta.items():
            if any(c.isspace() for c in k) or "\n" in v:
                raise CheckpointError(f"bad metadata entry {k!r}")
            lines.append(f"meta {k} {v}")
        for name, arr in self.arrays:
            arr = np.asarray(arr, dtype=float)
            lines.append(" ".join(["array", name, str(arr.ndim), *map(str, arr.shape)]))
            lines.append(" ".join(fmt_float(v) for v in arr.ravel()))
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Checkpoint":
        lines = text.split("\n")
        head = lines[0].split()
        if len(head) != 2 or head[0] != MAGIC:
            raise CheckpointError("not a checkpoint file")
        if int(head[1]) != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {head[1]}")
        if not lines[1].startswith("kind "):
            raise CheckpointError("missing kind line")
        kind = lines[1][5:]
        if kind not in KINDS:
            raise CheckpointError(f"unknown model kind {kind!r}")
        ck = cls(kind)
        i = 2
        while i < len(lines):
            line = lines[i]
            if line == "end":
                return ck
            if not line.strip() and not any(l.strip() for l in lines[i:]):
                break
            if line.startswith("meta "):
                _, key, value = line.split(" ", 2)
                ck.meta[key] = value
                i += 1
            elif line.startswith("array "):
                parts = line.split()
                ndim = int(parts[2])
                shape = tuple(int(p) for p in parts[3:3 + ndim])
                values = lines[i + 1].split() if i + 1 < len(lines) else []
                if len(values) != int(np.prod(shape)):
                    raise CheckpointError(f"array {parts[1]}: expected {int(np.prod(shape))} "
                                          f"values, got {len(values)}")
                ck.arrays.append((parts[1], np.array([float(v) for v in values]).reshape(shape)))
                i += 2
            else:
                raise CheckpointError(f"line {i + 1}: unrecognised entry")
        raise CheckpointError("truncated checkpoint (no end line)")

    def array_dict(self) -> Dict[str, np.ndarray]:
        return dict(self.arrays)


# ---------------------------------------------------------------------------
# model <-> checkpoint


def _net_entries(net: DenseNet, prefix: str, meta: Dict[str, str], arrays: list):
    meta[f"{prefix}.activations"] = ",".join(l.activation for l in net.layers)
    for i, layer in enumerate(net.layers):
        arrays.append((f"{prefix}.{i}.W", layer.weight.copy()))
        arrays.append((f"{prefix}.{i}.b", layer.bias.copy()))


def _net_from(ck: Checkpoint, prefix: str) -> DenseNet:
    key = f"{prefix}.activations"
    if key not in ck.meta:
        raise CheckpointError(f"missing network {prefix!r}")
    arrays = ck.array_dict()
    layers = []
    for i, act in enumerate(ck.meta[key].split(",")):
        try:
            layers.append(Layer(arrays[f"{prefix}.{i}.W"], arrays[f"{prefix}.{i}.b"], act))
        except KeyError as exc:
            raise CheckpointError(f"missing array {exc.args[0]}") from None
    return DenseNet(layers)


def to_checkpoint(model, extra_meta: Dict[str, str] = None) -> Checkpoint:
    meta: Dict[str, str] = {}
    arrays: list = []
    if isinstance(model, RadiusVaeModel):
        kind = "radius_vae"
        meta["alpha"] = fmt_float(model.alpha)
        meta["alpha_learnable"] = str(int(model.alpha_learnable))
        meta["eps_floor"] = fmt_float(model.eps_floor)
        meta["kl_form"] = model.kl_form
        _net_entries(model.enc_net, "enc", meta, arrays)
        _net_entries(model.dec_net, "dec", meta, arrays)
    elif isinstance(model, AngularVaeModel):
        kind = "angular_vae"
        meta["likelihood"] = model.likelihood
        meta["latent_dim"] = str(model.latent_dim)
        meta["m"] = str(model.m)
        _net_entries(model.enc_net, "enc", meta, arrays)
        _net_entries(model.dec_net, "dec", meta, arrays)
    elif isinstance(model, StdVaeModel):
        kind = "stdvae"
        meta["latent_dim"] = str(model.latent_dim)
        meta["m"] = str(model.m)
        _net_entries(model.enc_net, "enc", meta, arrays)
        _net_entries(model.dec_net, "dec", meta, arrays)
    else:
        raise CheckpointError(f"cannot checkpoint {type(model).__name__}")
    for k, v in (extra_meta or {}).items():
        meta[k] = str(v)
    return Checkpoint(kind, meta, arrays)


def from_checkpoint(ck: Checkpoint, expect_kind: str = None):
    if expect_kind is not None and ck.kind != expect_kind:
        raise CheckpointError(f"expected a {expect_kind} checkpoint, got {ck.kind}")
    meta = ck.meta
    try:
        if ck.kind == "radius_vae":
            return RadiusVaeModel(float(meta["alpha"]), _net_from(ck, "enc"), _net_from(ck, "dec"),
                                  bool(int(meta["alpha_learnable"])),
                                  float(meta["eps_floor"]), meta.get("kl_form", "exact"))
        if ck.kind == "angular_vae":
            return AngularVaeModel(int(meta["m"]), _net_from(ck, "enc"), _net_from(ck, "dec"),
                                   meta["likelihood"], int(meta["latent_dim"]))
        return StdVaeModel(int(meta["m"]), _net_from(ck, "enc"), _net_from(ck, "dec"),
                           int(meta["latent_dim"]))
    except KeyError as exc:
        raise CheckpointError(f"missing metadata {exc.args[0]}") from None


def save(path, model, extra_meta: Dict[str, str] = None) -> Checkpoint:
    ck = to_checkpoint(model, extra_meta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ck.to_text())
    return ck


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return Checkpoint.from_text(text)


def load(path, expect_kind: str = None):
    return from_checkpoint(load_checkpoint(path), expect_kind)
