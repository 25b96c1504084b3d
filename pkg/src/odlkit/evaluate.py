"""Run one method on one task scenario and report AUC or accuracy.

ODL trains in the deployed environment; every prediction-only method
trains in the silent environment.  All methods score the same eval stream.
"""

from __future__ import annotations

import numpy as np

from .baseline import (
    AE_HIDDEN,
    AE_TRAIN,
    CLASSIFIER_HIDDEN,
    CLASSIFIER_INIT_GAIN,
    CLASSIFIER_TUNED,
    TrainConfig,
    frozen_oselm_baseline,
    init_mlp,
    mlp_forward,
    reconstruction_scores,
    sgd_train,
)
from .datasets import SPEEDS, SpectrumSource, Task, build_task
from .ensemble import Mode, OdlEnsemble
from .errors import InvalidInputError
from .metrics import auc, classification_accuracy, greedy_instance_mapping
from .oselm import DEFAULT_DELTA

METHODS = ("odl", "oselm-frozen", "dnn-ae", "dnn-classifier")
OFFLINE_ENV = "silent"


def _ensemble_scores(task: Task, *, K: int, N: int, delta: float, seed: int):
    X = task.train.matrix()
    ens = OdlEnsemble.create(X.shape[1], N, K, seed=seed, delta=delta)
    ens.set_mode(Mode.TRAIN)
    assign = ens.kmeans_init(X)
    ens.set_mode(Mode.PREDICT)
    dets = [ens.predict(x) for x in task.eval.matrix()]
    scores = np.array([d.score_l for d in dets])
    classes = [d.class_k for d in dets]
    return scores, classes, assign


def evaluate(
    task_name: str,
    method: str,
    source: SpectrumSource,
    seed: int = 0,
    *,
    environment: str = "noisy",
    K: int = 4,
    N: int = 32,
    delta: float = DEFAULT_DELTA,
    ae_config: TrainConfig = AE_TRAIN,
    classifier_config: TrainConfig = CLASSIFIER_TUNED,
    classifier_gain: float = CLASSIFIER_INIT_GAIN,
) -> dict:
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    train_env = environment if method == "odl" else OFFLINE_ENV
    task = build_task(task_name, source, train_env=train_env, eval_env=environment, seed=seed)
    report = {
        "task": task_name,
        "method": method,
        "n_train": len(task.train),
        "n_eval": len(task.eval),
        "seed": seed,
    }

    if task.kind == "accuracy":
        if method == "dnn-ae":
            raise InvalidInputError("dnn-ae is an anomaly detector; use dnn-classifier for 4speeds")
        if method == "dnn-classifier":
            classes = list(SPEEDS)
            T = np.array([classes.index(lab) for lab in task.train.labels])
            X = task.train.matrix()
            model = init_mlp([X.shape[1], *CLASSIFIER_HIDDEN, len(classes)], "classifier", seed, classifier_gain)
            model = sgd_train(model, X, T, _with_seed(classifier_config, seed)).model
            pred = np.argmax(mlp_forward(model, task.eval.matrix()), axis=1)
            rep = classification_accuracy([int(p) for p in pred], [classes.index(t) for t in task.truth])
        else:
            if method == "odl":
                _, pred, assign = _ensemble_scores(task, K=K, N=N, delta=delta, seed=seed)
            else:
                res = frozen_oselm_baseline(task.train, task.eval, K=K, N=N, seed=seed, delta=delta)
                pred = res.classes.tolist()
                assign = res.assignments
            mapping = greedy_instance_mapping(assign.tolist(), task.train.labels)
            rep = classification_accuracy(pred, task.truth, mapping)
            report["mapping"] = {str(k): v for k, v in sorted(mapping.items())}
        report["accuracy"] = rep.accuracy
        report["n_unmapped"] = rep.n_unmapped
        return report

    if method == "dnn-classifier":
        raise InvalidInputError(f"dnn-classifier needs labeled classes; task {task_name} is an anomaly task")
    if method == "dnn-ae":
        X = task.train.matrix()
        model = init_mlp([X.shape[1], *AE_HIDDEN, X.shape[1]], "autoencoder", seed)
        model = sgd_train(model, X, X, _with_seed(ae_config, seed)).model
        scores = reconstruction_scores(model, task.eval.matrix())
    elif method == "odl":
        scores, _, _ = _ensemble_scores(task, K=K, N=N, delta=delta, seed=seed)
    else:
        scores = frozen_oselm_baseline(task.train, task.eval, K=K, N=N, seed=seed, delta=delta).scores
    report["auc"] = auc(scores, task.is_anomalous)
    return report


def _with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return TrainConfig(config.batch_size, config.epochs, config.learning_rate, seed)
