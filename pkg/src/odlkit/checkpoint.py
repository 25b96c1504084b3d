"""Versioned JSON checkpoints for ensembles and MLP baselines.

Arrays are stored as nested lists of Python floats; ``repr`` round-trips
float64 (and float32 widened to float64) exactly, so save -> load is
value-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baseline import MlpModel
from .ensemble import Mode, OdlEnsemble
from .errors import FormatError
from .oselm import HiddenProjection, OselmInstance

FORMAT_VERSION = 1


def ensemble_to_dict(ens: OdlEnsemble) -> dict:
    proj = ens.projection
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "odl-ensemble",
        "n": ens.n,
        "N": ens.N,
        "m": ens.m,
        "K": ens.K,
        "seed": proj.seed,
        "delta": ens.delta,
        "dtype": str(proj.dtype),
        "mode": ens.mode.value,
        "initialized": ens.initialized,
        "alpha": proj.alpha.tolist(),
        "b": proj.b.tolist(),
        "instances": [
            {"beta": inst.beta.tolist(), "P": inst.P.tolist(), "trained_count": inst.trained_count}
            for inst in ens.instances
        ],
        "centroids": ens.centroids.tolist(),
        "centroid_counts": ens.centroid_counts.tolist(),
    }


def _check_header(data: dict, kinds: tuple[str, ...]) -> None:
    if not isinstance(data, dict):
        raise FormatError("checkpoint must be a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint format_version {data.get('format_version')!r}")
    if data.get("model_kind") not in kinds:
        raise FormatError(f"checkpoint holds {data.get('model_kind')!r}, expected one of {kinds}")


def ensemble_from_dict(data: dict) -> OdlEnsemble:
    _check_header(data, ("odl-ensemble",))
    try:
        dtype = np.dtype(data["dtype"])
        proj = HiddenProjection(
            np.asarray(data["alpha"], dtype=dtype),
            np.asarray(data["b"], dtype=dtype),
            seed=data["seed"],
        )
        insts = [
            OselmInstance(
                np.asarray(d["beta"], dtype=dtype),
                np.asarray(d["P"], dtype=dtype),
                int(d["trained_count"]),
            )
            for d in data["instances"]
        ]
        ens = OdlEnsemble(
            proj,
            insts,
            delta=float(data["delta"]),
            mode=Mode(data["mode"]),
            initialized=bool(data["initialized"]),
        )
        ens.centroids = np.asarray(data["centroids"], dtype=np.float64)
        ens.centroid_counts = np.asarray(data["centroid_counts"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupt ensemble checkpoint: {exc}") from exc
    if (ens.n, ens.N, ens.m, ens.K) != (data["n"], data["N"], data["m"], data["K"]):
        raise FormatError("checkpoint shape header disagrees with stored arrays")
    return ens


def mlp_to_dict(model: MlpModel, *, seed: int | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": f"mlp-{model.kind}",
        "seed": seed,
        "layer_sizes": list(model.layer_sizes),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def mlp_from_dict(data: dict) -> MlpModel:
    _check_header(data, ("mlp-autoencoder", "mlp-classifier"))
    try:
        return MlpModel(
            [int(s) for s in data["layer_sizes"]],
            [np.asarray(W, dtype=np.float64) for W in data["weights"]],
            [np.asarray(b, dtype=np.float64) for b in data["biases"]],
            data["model_kind"].removeprefix("mlp-"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"corrupt MLP checkpoint: {exc}") from exc


def save(obj: OdlEnsemble | MlpModel, path: str | Path) -> None:
    data = ensemble_to_dict(obj) if isinstance(obj, OdlEnsemble) else mlp_to_dict(obj)
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n", encoding="utf-8")


def load(path: str | Path) -> OdlEnsemble | MlpModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed checkpoint JSON: {exc}") from exc
    kind = data.get("model_kind") if isinstance(data, dict) else None
    if kind == "odl-ensemble":
        return ensemble_from_dict(data)
    return mlp_from_dict(data)
