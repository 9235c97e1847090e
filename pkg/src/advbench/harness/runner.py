"""Config-driven experiment phases with a persisted, append-only output tree."""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..attacks import (
    AttackBudget,
    AttackMode,
    GapTrainConfig,
    build_generator,
    fgsm_attack,
    gap_perturb,
    pgd_attack,
    save_adversarial_batch,
    train_gap_generator,
)
from ..core.batch import ImageBatch, LabelBatch, Task
from ..core.classifier import Classifier, predict_labels, predict_proba
from ..core.dataset import Dataset, load_dataset
from ..core.zoo import build_classifier
from ..defenses import (
    TrainConfig,
    evaluate_robust_accuracy,
    maadvt_train,
    mpadvt_train,
    natural_training,
    standard_adversarial_training,
)
from ..errors import ConfigValidationError, ContractError
from ..metrics import (
    accuracy,
    attention_maps,
    auc,
    export_cooccurrence_csv,
    export_embeddings,
    fooling_ratio,
    label_cooccurrence,
    saliency_map,
)
from ..robustbench import (
    benchmark_flip_probability,
    build_benchmark,
    load_benchmark,
    relative_flip_probability,
    sequence_predictions,
    write_predictions_csv,
)
from ..seeding import child_seed, torch_generator
from .experiment import RunRecord, load_config, validate_config
from .toydata import make_toy_dataset


def _resolve_dataset(cfg: dict) -> Dataset:
    spec = cfg["dataset"]
    if spec.get("path"):
        return load_dataset(spec["path"])
    return make_toy_dataset(
        spec["name"], seed=child_seed(cfg["seed"], "data"),
        n_train=spec["train"], n_val=spec["val"], n_test=spec["test"],
    )


def _attack_budget(spec: dict) -> AttackBudget:
    return AttackBudget(
        epsilon=float(spec["epsilon"]),
        alpha=None if spec.get("alpha") is None else float(spec["alpha"]),
        steps=int(spec["steps"]),
        random_init=bool(spec.get("random_init", False)),
        mode=AttackMode(spec.get("mode", "non-target")),
    )


class ExperimentState:
    """Lazily resolves the dataset and phase artifacts living under out/."""

    def __init__(self, config: dict):
        self.config = config
        self.out = Path(config["out"])
        self._dataset: Optional[Dataset] = None
        self._model: Optional[Classifier] = None

    @property
    def dataset(self) -> Dataset:
        if self._dataset is None:
            self._dataset = _resolve_dataset(self.config)
        return self._dataset

    @property
    def model(self) -> Classifier:
        if self._model is None:
            path = self.out / "train" / "checkpoint.pt"
            if not path.exists():
                raise ContractError(
                    f"no trained model at {path}; run the train phase first"
                )
            self._model = Classifier.load(path)
        return self._model

    def defended_models(self) -> dict:
        models = {}
        root = self.out / "defend"
        if root.exists():
            for sub in sorted(root.iterdir()):
                ckpt = sub / "checkpoint.pt"
                if ckpt.exists():
                    models[sub.name] = Classifier.load(ckpt)
        return models


# ---- phases -----------------------------------------------------------------


def train_zoo_model(model_spec: dict, dataset: Dataset, train_cfg: dict,
                    seed: int, out_dir) -> Classifier:
    """Train a zoo model naturally; persist checkpoint + log + clean accuracy."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = build_classifier(
        model_spec["arch"], k=dataset.k,
        input_shape=dataset.split("train").images.image_shape,
        seed=child_seed(seed, "model"),
    )
    cfg = TrainConfig(
        outer_epochs=train_cfg["epochs"], batch_size=train_cfg["batch_size"],
        lr=train_cfg["lr"], momentum=train_cfg.get("momentum", 0.9),
        epsilon=0.0, inner_steps=0, seed=child_seed(seed, "train", "natural"),
    )
    model, log = natural_training(model, dataset, cfg)
    log.save_jsonl(out_dir / "trainlog.jsonl")
    test = dataset.split("test")
    clean_acc = accuracy(predict_proba(model, test.images), test.labels, dataset.task)
    model.save(out_dir / "checkpoint.pt", extra={"clean_test_accuracy": clean_acc})
    with open(out_dir / "clean_accuracy.json", "w") as fh:
        json.dump({"clean_test_accuracy": clean_acc}, fh)
    return model


def _phase_train(state: ExperimentState, record: RunRecord) -> None:
    out = state.out / "train"
    model = train_zoo_model(state.config["model"], state.dataset,
                            state.config["train"], state.config["seed"], out)
    state._model = model
    record.add_artifact("train", out / "checkpoint.pt")
    record.add_artifact("train", out / "trainlog.jsonl")
    with open(out / "clean_accuracy.json") as fh:
        record.metrics["clean_test_accuracy"] = json.load(fh)["clean_test_accuracy"]


def _target_labels(spec: dict, task: Task, k: int, m: int) -> LabelBatch:
    target = spec.get("target")
    if target is None:
        raise ConfigValidationError(["attack.target required for targeted mode"])
    if task is Task.SINGLE_LABEL:
        return LabelBatch.single(np.full(m, int(target)), k)
    return LabelBatch.multi(np.tile(np.asarray(target, dtype=np.int64), (m, 1)), k)


def _phase_attack(state: ExperimentState, record: RunRecord) -> None:
    spec = state.config["attack"]
    out = state.out / "attack"
    out.mkdir(parents=True, exist_ok=True)
    test = state.dataset.split("test")
    limit = spec.get("max_images")
    if limit:
        idx = range(min(int(limit), len(test)))
        images, labels = test.images.select(idx), test.labels.select(idx)
    else:
        images, labels = test.images, test.labels
    model = state.model
    seed = child_seed(state.config["seed"], "attack")
    if spec["kind"] == "gap":
        gen = build_generator(
            in_channels=images.image_shape[0], seed=seed)
        gap_cfg = GapTrainConfig(
            epochs=spec["gap"]["epochs"], batch_size=spec["gap"]["batch_size"],
            lr=spec["gap"]["lr"], seed=seed)
        gen, log = train_gap_generator(gen, model, state.dataset,
                                       spec["epsilon"], gap_cfg)
        torch.save(gen.state_dict(), out / "gap_generator.pt")
        with open(out / "gap_log.jsonl", "w") as fh:
            for rec in log:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        batch = gap_perturb(gen, images, spec["epsilon"], model=model)
    elif spec["kind"] == "fgsm":
        batch = fgsm_attack(model, images, labels, spec["epsilon"])
    elif spec["kind"] == "pgd":
        budget = _attack_budget(spec)
        y = (labels if budget.mode is AttackMode.NON_TARGET
             else _target_labels(spec, model.task, model.k, len(images)))
        batch = pgd_attack(model, images, y, budget, seed=seed)
    else:
        raise ConfigValidationError([f"attack.kind {spec['kind']!r} unknown"])
    save_adversarial_batch(batch, out, labels=labels)
    record.add_artifact("attack", out / "manifest.jsonl")
    record.add_artifact("attack", out / "budget.json")
    record.metrics["attack_success_rate"] = float(
        batch.success.to(torch.float64).mean())


def _defense_train_config(defend: dict, method: str, seed: int) -> TrainConfig:
    sub = defend.get(method, {})
    eps = sub.get("epsilon", defend.get("epsilon", 4.0 / 255.0))
    steps = sub.get("steps", defend.get("steps", 4))
    return TrainConfig(
        outer_epochs=defend["epochs"], batch_size=defend["batch_size"],
        lr=defend["lr"], momentum=defend.get("momentum", 0.9),
        epsilon=tuple(eps) if isinstance(eps, list) else eps,
        inner_steps=tuple(steps) if isinstance(steps, list) else steps,
        lam=sub.get("lam", 1.0),
        branch_threshold=sub.get("branch_threshold", 0.5),
        seed=child_seed(seed, "defend", method),
    )


_DEFENSES = {
    "standard": standard_adversarial_training,
    "mpadvt": mpadvt_train,
    "maadvt": maadvt_train,
}


def _phase_defend(state: ExperimentState, record: RunRecord) -> None:
    defend = state.config["defend"]
    for method in defend["methods"]:
        if method not in _DEFENSES:
            raise ConfigValidationError([f"defend method {method!r} unknown"])
        out = state.out / "defend" / method
        out.mkdir(parents=True, exist_ok=True)
        model = build_classifier(
            state.config["model"]["arch"], k=state.dataset.k,
            input_shape=state.dataset.split("train").images.image_shape,
            seed=child_seed(state.config["seed"], "model"),
        )
        cfg = _defense_train_config(defend, method, state.config["seed"])
        model, log = _DEFENSES[method](model, state.dataset, cfg)
        log.save_jsonl(out / "trainlog.jsonl")
        model.save(out / "checkpoint.pt")
        record.add_artifact("defend", out / "checkpoint.pt")


def _phase_bench(state: ExperimentState, record: RunRecord) -> None:
    spec = state.config["bench"]
    out = state.out / "bench"
    manifest = build_benchmark(
        state.dataset, out, types=spec["types"], n_frames=spec["n_frames"],
        seed=child_seed(state.config["seed"], "bench"),
        max_images=spec["max_images"], max_severity=spec["max_severity"],
    )
    record.add_artifact("bench", out / "manifest.jsonl")
    record.metrics["bench_sequences"] = manifest.r


def _eval_clean(state, test) -> dict:
    probs = predict_proba(state.model, test.images)
    mean_auc, per_class = auc(probs, test.labels, state.dataset.task, per_class=True)
    return {
        "section": "clean",
        "accuracy": accuracy(probs, test.labels, state.dataset.task),
        "auc": mean_auc,
        "auc_per_class": {str(c): v for c, v in per_class.items()},
        "counts": {"images": len(test)},
    }


def _eval_attack(state, test) -> Optional[dict]:
    adv_dir = state.out / "attack"
    if not (adv_dir / "manifest.jsonl").exists():
        return None
    from ..attacks import load_adversarial_images

    adv_images, budget_record = load_adversarial_images(adv_dir)
    id_to_index = {img_id: i for i, img_id in enumerate(test.images.ids)}
    idx = [id_to_index[i] for i in adv_images.ids]
    labels = test.labels.select(idx)
    clean = test.images.select(idx)
    model = state.model
    adv_probs = predict_proba(model, adv_images)
    clean_pred = predict_labels(model, clean)
    adv_pred = predict_labels(model, adv_images)
    return {
        "section": "attack",
        "accuracy": accuracy(adv_probs, labels, state.dataset.task),
        "auc": auc(adv_probs, labels, state.dataset.task),
        "fooling_ratio": fooling_ratio(clean_pred, adv_pred, state.dataset.task),
        "budget": budget_record,
        "counts": {"images": len(adv_images)},
    }


def _eval_defend(state, test) -> Optional[dict]:
    models = state.defended_models()
    if not models:
        return None
    budget = _attack_budget(state.config["eval"]["budget"])
    rows = {}
    natural = state.model
    seed = state.config["seed"]
    rows["natural"] = {
        "clean_accuracy": accuracy(
            predict_proba(natural, test.images), test.labels, state.dataset.task),
        "robust_accuracy": evaluate_robust_accuracy(
            natural, test, budget, rng=torch_generator(seed, "eval", "natural")),
    }
    for method, model in models.items():
        rows[method] = {
            "clean_accuracy": accuracy(
                predict_proba(model, test.images), test.labels, state.dataset.task),
            "robust_accuracy": evaluate_robust_accuracy(
                model, test, budget, rng=torch_generator(seed, "eval", method)),
        }
    return {"section": "defense", "budget": budget.to_dict(), "models": rows}


def _eval_bench(state) -> Optional[dict]:
    bench_dir = state.out / "bench"
    if not (bench_dir / "bench.json").exists():
        return None
    manifest = load_benchmark(bench_dir)
    preds = sequence_predictions(state.model, manifest)
    write_predictions_csv(preds, state.out / "eval" / "bench_predictions.csv")
    fp = benchmark_flip_probability(manifest, preds)

    def _rfp(value):
        # RFP is undefined at zero benchmark FP; report null rather than fail
        if fp["overall"] <= 0.0:
            return None
        return relative_flip_probability(value, fp["overall"])

    rows = {
        "natural": {
            "fp": fp["overall"],
            "rfp": _rfp(fp["overall"]),
            "per_type": fp["per_type"],
        }
    }
    for method, model in state.defended_models().items():
        fp_m = benchmark_flip_probability(manifest, sequence_predictions(model, manifest))
        rows[method] = {
            "fp": fp_m["overall"],
            "rfp": _rfp(fp_m["overall"]),
            "per_type": fp_m["per_type"],
        }
    return {"section": "benchmark", "modes": fp["modes"], "models": rows,
            "benchmark_model": "natural"}


def _eval_introspection(state, test, out: Path) -> list:
    """Export saliency / attention / embeddings / co-occurrence artifacts."""
    spec = state.config["eval"]
    model = state.model
    paths = []
    n = min(int(spec["samples"]), len(test))
    sal_dir = out / "introspection"
    sal_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        image = test.images.select([i])
        label = test.labels.select([i])
        sal = saliency_map(model, image, label)
        path = sal_dir / f"saliency_{image.ids[0]}.npz"
        np.savez(path, values=sal.values, vmin=sal.vmin, vmax=sal.vmax)
        paths.append(path)
        if model.attention_taps:
            maps = attention_maps(model, image)
            path = sal_dir / f"attention_{image.ids[0]}.npz"
            np.savez(path, **maps)
            paths.append(path)
    tap = model.taps[-1] if model.taps else None
    if tap:
        sub = test.images.select(range(n))
        lab = test.labels.select(range(n))
        paths.append(export_embeddings(
            model, sub, lab, tap, sal_dir / "embeddings_clean.csv",
            split="test", variant="clean"))
    if state.dataset.task is Task.MULTI_LABEL:
        clean_pred = predict_labels(model, test.images)
        matrix = label_cooccurrence(clean_pred)
        paths.append(export_cooccurrence_csv(
            matrix, sal_dir / "cooccurrence_clean.csv"))
        adv_dir = state.out / "attack"
        if (adv_dir / "manifest.jsonl").exists():
            from ..attacks import load_adversarial_images

            adv_images, _ = load_adversarial_images(adv_dir)
            adv_pred = predict_labels(model, adv_images)
            paths.append(export_cooccurrence_csv(
                label_cooccurrence(adv_pred),
                sal_dir / "cooccurrence_adversarial.csv"))
    return paths


def _phase_eval(state: ExperimentState, record: RunRecord) -> None:
    out = state.out / "eval"
    out.mkdir(parents=True, exist_ok=True)
    test = state.dataset.split("test")
    sections = []
    for section in (_eval_clean(state, test), _eval_attack(state, test),
                    _eval_defend(state, test), _eval_bench(state)):
        if section is not None:
            sections.append(section)
    if state.config["eval"]["introspect"]:
        for path in _eval_introspection(state, test, out):
            record.add_artifact("eval", path)
    with open(out / "records.jsonl", "w") as fh:
        for section in sections:
            fh.write(json.dumps(section, sort_keys=True) + "\n")
    with open(out / "summary.json", "w") as fh:
        json.dump({s["section"]: s for s in sections}, fh, indent=2, sort_keys=True)
    record.add_artifact("eval", out / "summary.json")
    record.add_artifact("eval", out / "records.jsonl")
    for section in sections:
        if section["section"] == "clean":
            record.metrics["clean_accuracy"] = section["accuracy"]
        if section["section"] == "attack":
            record.metrics["adversarial_accuracy"] = section["accuracy"]
            record.metrics["fooling_ratio"] = section["fooling_ratio"]


def _phase_report(state: ExperimentState, record: RunRecord) -> None:
    from .report import emit_report

    for path in emit_report(state, record):
        record.add_artifact("report", path)


_PHASE_FNS = {
    "train": _phase_train,
    "attack": _phase_attack,
    "defend": _phase_defend,
    "bench": _phase_bench,
    "eval": _phase_eval,
    "report": _phase_report,
}


def run_experiment(config_path=None, config: Optional[dict] = None,
                   phases: Optional[list] = None, seed: Optional[int] = None,
                   out: Optional[str] = None) -> RunRecord:
    """Execute the configured phases in order; returns the persisted RunRecord."""
    if config is None:
        config = load_config(config_path)
    else:
        config = validate_config(config)
    if seed is not None:
        config["seed"] = int(seed)
    if out is not None:
        config["out"] = str(out)
    if phases is not None:
        config = dict(config, phases=list(phases))
        config = validate_config(config)
    state = ExperimentState(config)
    state.out.mkdir(parents=True, exist_ok=True)
    record = RunRecord.start(config)
    for phase in config["phases"]:
        started = time.time()
        _PHASE_FNS[phase](state, record)
        record.time_phase(phase, started)
    record.save(state.out / "run_record.json")
    return record
