"""JSON round-trips for models, forms, maps, and paths.

Grid arrays are stored row-major as nested lists under a self-describing
header (type tag, periods, resolution, metric, symplectic matrix), so fixture
files remain valid when defaults change.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .paths import IsotopyPath
from .torus import Closedness, DiffeoMap, OneFormField, TorusModel


def model_to_dict(model: TorusModel) -> dict:
    return {
        "type": "torus_model",
        "half_dim": model.half_dim,
        "periods": list(model.periods),
        "grid_res": model.grid_res,
        "metric_diag": list(model.metric_diag),
        "symplectic_matrix": model.symplectic_matrix.tolist(),
    }


def model_from_dict(data: dict) -> TorusModel:
    if data.get("type") != "torus_model":
        raise ConfigError("type", "expected torus_model")
    return TorusModel(
        half_dim=int(data["half_dim"]),
        periods=tuple(data["periods"]),
        grid_res=int(data["grid_res"]),
        metric_diag=tuple(data["metric_diag"]),
        symplectic_matrix=np.asarray(data["symplectic_matrix"], dtype=float),
    )


def form_to_dict(form: OneFormField) -> dict:
    return {
        "type": "one_form",
        "model": model_to_dict(form.model),
        "closedness": form.tag.value,
        "components": form.components.tolist(),
    }


def form_from_dict(data: dict) -> OneFormField:
    if data.get("type") != "one_form":
        raise ConfigError("type", "expected one_form")
    model = model_from_dict(data["model"])
    tag = Closedness(data.get("closedness", "unchecked"))
    return OneFormField(model, np.asarray(data["components"], dtype=float), tag)


def map_to_dict(phi: DiffeoMap) -> dict:
    return {
        "type": "diffeo_map",
        "model": model_to_dict(phi.model),
        "displacement": phi.displacement.tolist(),
    }


def map_from_dict(data: dict) -> DiffeoMap:
    if data.get("type") != "diffeo_map":
        raise ConfigError("type", "expected diffeo_map")
    model = model_from_dict(data["model"])
    return DiffeoMap(model, np.asarray(data["displacement"], dtype=float))


def path_to_dict(path: IsotopyPath) -> dict:
    return {
        "type": "isotopy_path",
        "model": model_to_dict(path.model),
        "samples": path.samples.tolist(),
    }


def path_from_dict(data: dict) -> IsotopyPath:
    if data.get("type") != "isotopy_path":
        raise ConfigError("type", "expected isotopy_path")
    model = model_from_dict(data["model"])
    return IsotopyPath(model, np.asarray(data["samples"], dtype=float))


_SAVERS = {
    TorusModel: model_to_dict,
    OneFormField: form_to_dict,
    DiffeoMap: map_to_dict,
    IsotopyPath: path_to_dict,
}

_LOADERS = {
    "torus_model": model_from_dict,
    "one_form": form_from_dict,
    "diffeo_map": map_from_dict,
    "isotopy_path": path_from_dict,
}


def save_json(obj, path: str):
    for cls, saver in _SAVERS.items():
        if isinstance(obj, cls):
            with open(path, "w") as fh:
                json.dump(saver(obj), fh)
            return
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_json(path: str):
    with open(path) as fh:
        data = json.load(fh)
    kind = data.get("type")
    if kind not in _LOADERS:
        raise ConfigError("type", f"unknown fixture type {kind!r}")
    return _LOADERS[kind](data)
