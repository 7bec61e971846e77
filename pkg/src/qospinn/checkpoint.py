"""Model checkpoints: one .npz per model, parameter arrays plus JSON metadata.

Every orthogonal layer is stored as its flat (n, d_in, d_out, thetas, bias)
record under its parameter-path keys; dense layers as (W, bias). Loading
rebuilds the architecture from the metadata and copies the arrays in.
"""

import json

import numpy as np

from .model import SpinnModel, build_spinn
from .uq import UqSpinn


def save_model(model, path, extra_meta=None):
    meta = {"format": 1}
    arrays = {}
    if isinstance(model, SpinnModel):
        meta.update({
            "kind": "spinn",
            "n_subnets": model.n_axes,
            "widths": model.subnets[0].widths,
            "axis_ranges": model.axis_ranges,
            "rank": model.rank,
            "combiner": model.combiner,
        })
        arrays = dict(model.param_dict())
    elif isinstance(model, UqSpinn):
        meta.update({
            "kind": "uq_spinn",
            "subnet_widths": [model.subnets[0].width] * (1 + len(model.subnets[0].blocks)),
            "trunk_widths": [model.trunk.width] * (1 + len(model.trunk.blocks)),
            "axis_ranges": model.axis_ranges,
            "feature_count": model.head.D_L,
            "gamma": model.head.gamma,
            "ridge": model.head.ridge,
        })
        arrays = dict(model.param_dict())
        arrays["head.W_L"] = model.head.W_L
        arrays["head.b_L"] = model.head.b_L
        if model.head.Sigma is not None:
            arrays["head.Sigma"] = model.head.Sigma
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    if extra_meta:
        meta["extra"] = extra_meta
    np.savez_compressed(path, __meta__=np.frombuffer(
        json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path):
    data = np.load(path)
    meta = json.loads(bytes(data["__meta__"]).decode())
    if meta.get("format") != 1:
        raise ValueError(f"unsupported checkpoint format {meta.get('format')}")
    if meta["kind"] == "spinn":
        model = build_spinn(meta["n_subnets"], meta["widths"], meta["axis_ranges"])
        for name, arr in model.param_dict().items():
            arr[...] = data[name]
        model.combiner = meta.get("combiner", "product_sum")
        return model
    if meta["kind"] == "uq_spinn":
        model = UqSpinn(meta["subnet_widths"], meta["trunk_widths"], meta["axis_ranges"],
                        feature_count=meta["feature_count"], gamma=meta["gamma"],
                        ridge=meta["ridge"])
        for name, arr in model.param_dict().items():
            arr[...] = data[name]
        W = data["head.W_L"].copy()
        b = data["head.b_L"].copy()
        W.setflags(write=False)
        b.setflags(write=False)
        model.head.W_L = W
        model.head.b_L = b
        if "head.Sigma" in data:
            model.head.Sigma = data["head.Sigma"].copy()
        return model
    raise ValueError(f"unknown checkpoint kind {meta['kind']!r}")
