"""Checkpoint container: one .npz file holding named networks.

Each network stores its layer spec (as JSON) plus a SHA-256 hash of the
canonical spec encoding; loading recomputes and verifies the hash and all
tensor shapes, so a checkpoint can never silently drive the wrong
architecture.
"""
from __future__ import annotations

import hashlib
import json
from typing import Dict, Optional

import numpy as np

from ..errors import CheckpointError
from .layers import CONV, BILINEAR_UP, LayerSpec
from .net import NetParams, NetSpec, Network, check_params

FORMAT_VERSION = 1


def layer_to_dict(layer: LayerSpec) -> dict:
    d: dict = {"kind": layer.kind}
    if layer.kind == CONV:
        d.update(
            in_channels=layer.in_channels,
            out_channels=layer.out_channels,
            kernel=layer.kernel,
            dilation=layer.dilation,
        )
    elif layer.kind == BILINEAR_UP:
        d["factor"] = layer.factor
    return d


def layer_from_dict(d: dict) -> LayerSpec:
    kind = d["kind"]
    if kind == CONV:
        return LayerSpec(
            CONV,
            in_channels=int(d["in_channels"]),
            out_channels=int(d["out_channels"]),
            kernel=int(d["kernel"]),
            dilation=int(d.get("dilation", 1)),
        )
    if kind == BILINEAR_UP:
        return LayerSpec(BILINEAR_UP, factor=int(d["factor"]))
    return LayerSpec(kind)


def spec_to_dict(spec: NetSpec) -> dict:
    return {
        "in_channels": spec.in_channels,
        "layers": [layer_to_dict(layer) for layer in spec.layers],
    }


def spec_from_dict(d: dict) -> NetSpec:
    return NetSpec(
        in_channels=int(d["in_channels"]),
        layers=tuple(layer_from_dict(x) for x in d["layers"]),
    )


def spec_hash(spec: NetSpec) -> str:
    canon = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_checkpoint(path: str, nets: Dict[str, Network]) -> None:
    meta = {"version": FORMAT_VERSION, "nets": {}}
    arrays: Dict[str, np.ndarray] = {}
    for name, net in nets.items():
        check_params(net.spec, net.params)
        meta["nets"][name] = {
            "spec": spec_to_dict(net.spec),
            "spec_hash": spec_hash(net.spec),
        }
        for i, pair in enumerate(net.params.tensors):
            if pair is None:
                continue
            arrays[f"{name}.layer{i:02d}.weight"] = pair[0]
            arrays[f"{name}.layer{i:02d}.bias"] = pair[1]
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **arrays)


def load_checkpoint(
    path: str, expect: Optional[Dict[str, NetSpec]] = None
) -> Dict[str, Network]:
    """Load all networks; verifies spec hashes, shapes, and expectations."""
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "meta" not in arrays:
        raise CheckpointError(f"{path} is not a checkpoint (missing meta entry)")
    meta = json.loads(str(arrays.pop("meta")))
    if meta.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")

    nets: Dict[str, Network] = {}
    for name, entry in meta["nets"].items():
        spec = spec_from_dict(entry["spec"])
        if spec_hash(spec) != entry["spec_hash"]:
            raise CheckpointError(f"net {name!r}: stored spec hash does not match spec")
        tensors = []
        for i in range(len(spec.layers)):
            wk, bk = f"{name}.layer{i:02d}.weight", f"{name}.layer{i:02d}.bias"
            if wk in arrays:
                tensors.append((arrays[wk], arrays[bk]))
            else:
                tensors.append(None)
        params = NetParams(tuple(tensors))
        try:
            check_params(spec, params)
        except ValueError as exc:
            raise CheckpointError(f"net {name!r}: {exc}") from exc
        nets[name] = Network(spec=spec, params=params)

    if expect is not None:
        for name, spec in expect.items():
            if name not in nets:
                raise CheckpointError(f"checkpoint lacks required net {name!r}")
            if spec_hash(nets[name].spec) != spec_hash(spec):
                raise CheckpointError(
                    f"net {name!r}: checkpoint spec differs from the expected spec"
                )
    return nets
