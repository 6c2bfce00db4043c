"""Desk-scale training loop for the relation decoder on synthetic scenes."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from reldetr.contracts import SCHEMA_VERSION, validate_experiment_report
from reldetr.decoder.contrast import contrast_forward, init_queries, run_path
from reldetr.decoder.memory import build_memory
from reldetr.decoder.models import Memory
from reldetr.decoder.weights import DecoderModel, build_model
from reldetr.errors import NumericError
from reldetr.matching.losses import one_to_many_loss, one_to_one_loss
from reldetr.numkit import ops
from reldetr.numkit.tensor import Tensor
from reldetr.perf import PerfTracker
from reldetr.profiles import Profile
from reldetr.rng import SeedTree
from reldetr.toyexp.metrics import toy_ap
from reldetr.toyexp.models import VARIANTS, ExperimentReport, LossPoint, Scene
from reldetr.toyexp.scenes import generate_scenes, split_scenes

LOGGER = logging.getLogger("reldetr.toyexp.train")


def config_hash(config: dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _scene_memory(scene: Scene, model: DecoderModel, seed: int) -> Memory:
    # Same stream every step, so a scene keeps its noise for the whole run.
    rng = SeedTree(seed).child("memory").generator(str(scene.index))
    return build_memory(scene.objects, model, rng)


def evaluate_toy_ap(
    model: DecoderModel,
    scenes: list[Scene],
    seed: int,
    *,
    relation: bool = True,
    counters: PerfTracker | None = None,
) -> float:
    """Toy-AP of the final matching-layer predictions (inference path only)."""
    predictions: list[tuple[np.ndarray, np.ndarray]] = []
    for scene in scenes:
        matching, _ = init_queries(model)
        outputs = contrast_forward(
            matching,
            None,
            _scene_memory(scene, model, seed),
            model,
            "infer",
            relation=relation,
            counters=counters,
        )
        final = outputs.final()
        predictions.append((final.boxes.numpy(), final.logits.numpy()))
    return toy_ap(predictions, [scene.objects for scene in scenes])


class GradientDescent:
    """Plain gradient descent with optional heavy-ball momentum."""

    def __init__(self, model: DecoderModel, lr: float, momentum: float = 0.0) -> None:
        self.model = model
        self.lr = lr
        self.momentum = momentum
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, scale: float = 1.0) -> None:
        for parameter in self.model.params:
            grad = parameter.grad * scale
            if self.momentum:
                velocity = self._velocity.get(parameter.name)
                velocity = grad if velocity is None else self.momentum * velocity + grad
                self._velocity[parameter.name] = velocity
                grad = velocity
            parameter.assign(parameter.value.data - self.lr * grad)


def _step_losses(
    model: DecoderModel,
    scene: Scene,
    seed: int,
    variant: str,
    profile: Profile,
) -> tuple[Tensor, dict[str, float]]:
    matching, hybrid = init_queries(model)
    memory = _scene_memory(scene, model, seed)
    relation = variant != "baseline"
    if variant == "relation+contrast":
        outputs = contrast_forward(matching, hybrid, memory, model, "train", relation=relation)
        assert outputs.hybrid is not None
        matched = one_to_one_loss(outputs.matching, scene.objects, profile.loss)
        hybrid_loss = one_to_many_loss(
            outputs.hybrid, scene.objects, model.decoder.repeat, profile.loss
        )
        values = matched.as_dict()
        values["hybrid_total"] = hybrid_loss.total.item()
        return ops.add(matched.total, hybrid_loss.total), values
    predictions = run_path(matching, memory, model, use_relation=relation)
    matched = one_to_one_loss(predictions, scene.objects, profile.loss)
    return matched.total, matched.as_dict()


def _mean_point(step: int, values: list[dict[str, float]]) -> LossPoint:
    def mean(key: str) -> float:
        return float(np.mean([item[key] for item in values]))

    hybrid = mean("hybrid_total") if "hybrid_total" in values[0] else None
    return LossPoint(
        step=step,
        cls=mean("cls"),
        l1=mean("l1"),
        giou=mean("giou"),
        total=mean("total"),
        hybrid_total=hybrid,
    )


def run_experiment(
    variant: str,
    steps: int,
    seed: int,
    profile: Profile,
    *,
    model: DecoderModel | None = None,
    timing: bool = False,
) -> tuple[ExperimentReport, DecoderModel]:
    """Train one variant for ``steps`` full-batch steps over the training scenes.

    Returns the report and the trained model. A step whose loss exceeds the
    divergence threshold stops the run with ``diverged`` set; a NaN or
    infinity raises :class:`NumericError` naming the step.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {', '.join(VARIANTS)}, got {variant!r}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    tracker = PerfTracker(enabled=timing)
    tracker.start()

    train_cfg = profile.train
    config = profile.as_dict()
    model = model or build_model(profile.decoder, profile.relenc, profile.memory, seed=seed)
    scenes = generate_scenes(
        train_cfg.num_scenes,
        seed,
        train_cfg.correlation,
        num_classes=profile.decoder.num_classes,
        max_objects=train_cfg.max_objects,
    )
    train_scenes, eval_scenes = split_scenes(scenes, seed, train_cfg.eval_fraction)
    relation = variant != "baseline"
    report = ExperimentReport(
        config=config,
        config_hash=config_hash(config),
        seed=seed,
        variant=variant,
        steps=steps,
    )
    with tracker.span("eval"):
        report.toy_ap_initial = evaluate_toy_ap(model, eval_scenes, seed, relation=relation)

    optimizer = GradientDescent(model, train_cfg.lr, train_cfg.momentum)
    for step in range(steps):
        model.params.zero_grad()
        values: list[dict[str, float]] = []
        with tracker.span("train_step"):
            try:
                for scene in train_scenes:
                    loss, scene_values = _step_losses(model, scene, seed, variant, profile)
                    ops.check_finite(loss, "loss")
                    loss.backward()
                    values.append(scene_values)
            except NumericError as exc:
                LOGGER.error("numeric failure: %s", exc, extra={"step": step})
                raise NumericError(str(exc), location=f"step {step}") from exc
        point = _mean_point(step, values)
        report.losses.append(point)
        combined = point.total + (point.hybrid_total or 0.0)
        LOGGER.debug(
            "loss %.6f (cls %.4f, l1 %.4f, giou %.4f)",
            combined,
            point.cls,
            point.l1,
            point.giou,
            extra={"step": step},
        )
        if combined > train_cfg.divergence_threshold:
            LOGGER.warning("loss %.3e above divergence threshold", combined, extra={"step": step})
            report.diverged = True
            break
        optimizer.step(scale=1.0 / len(train_scenes))

    if not report.diverged:
        with tracker.span("eval"):
            report.toy_ap = evaluate_toy_ap(model, eval_scenes, seed, relation=relation)
    tracker.stop()
    if timing:
        report.wall_ms = round(tracker.elapsed_ms, 3)
        LOGGER.debug("timing %s", tracker.summary()["spans"])
    LOGGER.info(
        "%s: L_m %.4f -> %.4f over %s steps, toy AP %.3f",
        variant,
        report.initial_total,
        report.final_total,
        len(report.losses),
        report.toy_ap,
    )
    return report, model


def report_as_dict(report: ExperimentReport) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": report.config,
        "config_hash": report.config_hash,
        "seed": report.seed,
        "variant": report.variant,
        "steps": report.steps,
        "losses": [point.as_dict() for point in report.losses],
        "toy_ap": report.toy_ap,
        "toy_ap_initial": report.toy_ap_initial,
        "diverged": report.diverged,
        "wall_ms": report.wall_ms,
    }


def report_bytes(report: ExperimentReport) -> bytes:
    payload = report_as_dict(report)
    validate_experiment_report(payload)
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_report(report: ExperimentReport, path: Path) -> Path:
    """Validate and write the report JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(report_bytes(report))
    return path
