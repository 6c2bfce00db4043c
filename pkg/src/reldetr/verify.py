"""Property and oracle suites run by ``reldetr verify``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from reldetr.decoder.attention import multi_head_attention
from reldetr.decoder.contrast import contrast_forward, init_queries
from reldetr.decoder.memory import build_memory
from reldetr.decoder.models import LayerPrediction
from reldetr.decoder.weights import RELENC_PREFIX, DecoderModel, build_model
from reldetr.geom import Box, relation_matrix, relative_geometry
from reldetr.jobs import run_jobs
from reldetr.matching.cost import matching_cost
from reldetr.matching.hungarian import brute_force_assignment, hungarian
from reldetr.matching.losses import one_to_many_loss, one_to_one_loss
from reldetr.matching.models import Assignment, GroundTruth, LossWeights
from reldetr.mcstat.stats import image_mc, pearson4
from reldetr.numkit import ops
from reldetr.numkit.gradcheck import GradcheckReport, gradcheck
from reldetr.numkit.tensor import Parameter, ParameterSet, Tensor
from reldetr.perf import PerfTracker
from reldetr.profiles import Profile, get_profile
from reldetr.relenc import RelationBias, encode_relation, init_relation_params, sincos_embed
from reldetr.rng import SeedTree
from reldetr.toyexp.scenes import generate_scenes
from reldetr.toyexp.train import run_experiment

LOGGER = logging.getLogger("reldetr.verify")

SUITES = ("gradcheck", "hungarian", "invariants")
GRADCHECK_TOL = 1e-4
DECODER_SEEDS = 10
OP_SEEDS = 50
HUNGARIAN_TRIALS = 200
MC_SCENES = 500
INVARIANCE_PAIRS = 1000
NEUTRALITY_STEPS = 50


@dataclass(frozen=True)
class CaseResult:
    """Outcome of one verification case."""

    suite: str
    name: str
    passed: bool
    metric: float | None = None
    detail: str = ""

    def as_dict(self) -> dict[str, object]:
        return {
            "suite": self.suite,
            "name": self.name,
            "passed": self.passed,
            "metric": self.metric,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Case:
    suite: str
    name: str
    run: Callable[[], CaseResult]


# ---------------------------------------------------------------- gradcheck


def _positive(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.uniform(0.5, 2.0, size=shape)


def _signed(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.uniform(-2.0, 2.0, size=shape)


OpBuilder = Callable[[np.random.Generator], tuple[list[Parameter], Callable[[], Tensor]]]


def _unary(fn: Callable[[Tensor], Tensor], sampler=_signed) -> OpBuilder:
    def build(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
        shape = tuple(int(v) for v in rng.integers(1, 7, size=2))
        x = Parameter.create("x", sampler(rng, shape))
        return [x], lambda: fn(x.value)

    return build


def _binary(fn: Callable[[Tensor, Tensor], Tensor], sampler=_signed) -> OpBuilder:
    def build(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
        shape = tuple(int(v) for v in rng.integers(1, 7, size=2))
        a = Parameter.create("a", sampler(rng, shape))
        b = Parameter.create("b", sampler(rng, (1, shape[1])))
        return [a, b], lambda: fn(a.value, b.value)

    return build


def _matmul(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
    m, k, n = (int(v) for v in rng.integers(1, 7, size=3))
    a = Parameter.create("a", _signed(rng, (m, k)))
    b = Parameter.create("b", _signed(rng, (k, n)))
    return [a, b], lambda: ops.matmul(a.value, b.value)


def _linear(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
    n, d_in, d_out = (int(v) for v in rng.integers(1, 7, size=3))
    x = Parameter.create("x", _signed(rng, (n, d_in)))
    w = Parameter.create("w", _signed(rng, (d_out, d_in)))
    b = Parameter.create("b", _signed(rng, (d_out,)))
    return [x, w, b], lambda: ops.linear(x.value, w.value, b.value)


def _biased_softmax(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
    shape = tuple(int(v) for v in rng.integers(1, 7, size=2))
    x = Parameter.create("x", _signed(rng, shape))
    bias = Parameter.create("bias", _signed(rng, shape))
    return [x, bias], lambda: ops.softmax_rows(x.value, bias.value)


def _gather(rng: np.random.Generator) -> tuple[list[Parameter], Callable[[], Tensor]]:
    shape = tuple(int(v) for v in rng.integers(1, 7, size=2))
    x = Parameter.create("x", _signed(rng, shape))
    index = rng.integers(0, shape[0], size=int(rng.integers(1, 7)))
    return [x], lambda: ops.concat([ops.take(x.value, index, axis=0), x.value], axis=0)


OP_BUILDERS: dict[str, OpBuilder] = {
    "add": _binary(ops.add),
    "sub": _binary(ops.sub),
    "mul": _binary(ops.mul),
    "div": _binary(ops.div, _positive),
    "maximum": _binary(ops.maximum),
    "minimum": _binary(ops.minimum),
    "matmul": _matmul,
    "linear": _linear,
    "exp": _unary(ops.exp),
    "log": _unary(ops.log, _positive),
    "sin": _unary(ops.sin),
    "cos": _unary(ops.cos),
    "abs": _unary(ops.abs),
    "sigmoid": _unary(ops.sigmoid),
    "softplus": _unary(ops.softplus),
    "relu": _unary(ops.relu),
    "clamp_min": _unary(lambda x: ops.clamp_min(x, 0.1)),
    "power": _unary(lambda x: ops.power(x, 3.0)),
    "softmax_rows": _unary(ops.softmax_rows),
    "softmax_rows_biased": _biased_softmax,
    "transpose": _unary(ops.transpose),
    "reshape": _unary(lambda x: ops.reshape(x, (-1,))),
    "mean": _unary(lambda x: ops.mean(x, axis=0)),
    "take_concat": _gather,
}


def op_gradcheck(name: str, seed: int) -> float:
    """Max relative error of one op under a random linear read-out."""
    rng = np.random.default_rng(seed)
    params, fn = OP_BUILDERS[name](rng)
    readout = rng.normal(size=fn().shape)

    def loss() -> Tensor:
        return ops.sum(ops.mul(fn(), readout))

    return gradcheck(loss, params, step=1e-5, tol=GRADCHECK_TOL).max_rel_error


def _op_case(name: str) -> CaseResult:
    worst = max(op_gradcheck(name, seed) for seed in range(OP_SEEDS))
    return CaseResult("gradcheck", f"op {name}", worst < GRADCHECK_TOL, worst, f"{OP_SEEDS} seeds")


def decoder_gradcheck_model(seed: int, profile: Profile | None = None) -> DecoderModel:
    """Small model with non-zero refinement heads so every parameter gets a gradient."""
    profile = profile or get_profile("gradcheck")
    model = build_model(profile.decoder, profile.relenc, profile.memory, seed=seed)
    tree = SeedTree(seed).child("verify")
    for parameter in model.params.subset("decoder.layers."):
        if ".box.fc2." in parameter.name:
            rng = tree.generator(parameter.name)
            parameter.assign(rng.uniform(-0.1, 0.1, size=parameter.shape))
    return model


def decoder_loss_fn(model: DecoderModel, gt: GroundTruth, seed: int) -> Callable[[], Tensor]:
    """Scalar one-to-one loss of the matching path, rebuilt from current parameters."""

    def loss() -> Tensor:
        matching, _ = init_queries(model)
        memory = build_memory(gt, model, SeedTree(seed).generator("memory"))
        outputs = contrast_forward(matching, None, memory, model, "infer")
        return one_to_one_loss(outputs.matching, gt, LossWeights()).total

    return loss


def decoder_gradcheck_report(seed: int, *, max_entries: int = 3) -> GradcheckReport:
    """Check every relation-head entry and ``max_entries`` sampled entries elsewhere."""
    profile = get_profile("gradcheck")
    model = decoder_gradcheck_model(seed, profile)
    scene = generate_scenes(
        1, seed, "none", num_classes=profile.decoder.num_classes, max_objects=3
    )[0]
    loss = decoder_loss_fn(model, scene.objects, seed)
    params = [p for p in model.params if p.name != "queries.hybrid"]
    relation = [p for p in params if p.name.startswith(f"{RELENC_PREFIX}.")]
    others = [p for p in params if not p.name.startswith(f"{RELENC_PREFIX}.")]
    exhaustive = gradcheck(loss, relation, tol=GRADCHECK_TOL, seed=seed)
    sampled = gradcheck(loss, others, tol=GRADCHECK_TOL, max_entries=max_entries, seed=seed)
    return GradcheckReport(
        checks=exhaustive.checks + sampled.checks, step=sampled.step, tol=GRADCHECK_TOL
    )


def decoder_gradcheck(seed: int, *, max_entries: int = 3) -> float:
    return decoder_gradcheck_report(seed, max_entries=max_entries).max_rel_error


def _decoder_case() -> CaseResult:
    errors = [decoder_gradcheck(seed) for seed in range(DECODER_SEEDS)]
    worst = max(errors)
    return CaseResult(
        "gradcheck",
        "relenc + decoder + one-to-one loss",
        worst < GRADCHECK_TOL,
        worst,
        f"{DECODER_SEEDS} seeds",
    )


# ---------------------------------------------------------------- hungarian


def hungarian_trial(seed: int) -> tuple[Assignment, Assignment]:
    """Solve one random matrix both ways; odd seeds draw integer costs full of ties."""
    rng = np.random.default_rng(seed)
    n, m = (int(v) for v in rng.integers(1, 8, size=2))
    if seed % 2:
        cost = rng.integers(0, 3, size=(n, m)).astype(np.float64)
    else:
        cost = rng.uniform(-10.0, 10.0, size=(n, m))
    return hungarian(cost), brute_force_assignment(cost)


def _hungarian_case() -> CaseResult:
    mismatches: list[int] = []
    for seed in range(HUNGARIAN_TRIALS):
        solved, oracle = hungarian_trial(seed)
        if solved != oracle:
            mismatches.append(seed)
    detail = f"{HUNGARIAN_TRIALS} matrices"
    if mismatches:
        detail += f"; mismatched seeds {mismatches[:5]}"
    return CaseResult(
        "hungarian",
        "pairs and cost equal exhaustive search",
        not mismatches,
        float(HUNGARIAN_TRIALS - len(mismatches)),
        detail,
    )


# ---------------------------------------------------------------- invariants


def dyadic_box_pair(rng: np.random.Generator) -> tuple[Box, Box]:
    def draw() -> Box:
        x, y = (float(v) / 64.0 for v in rng.integers(-256, 257, size=2))
        w, h = (float(v) / 64.0 for v in rng.integers(1, 257, size=2))
        return Box(x, y, w, h)

    return draw(), draw()


def transform_box(box: Box, scale: float, dx: float, dy: float) -> Box:
    return Box(scale * box.x + dx, scale * box.y + dy, scale * box.w, scale * box.h)


def _relation_invariance() -> CaseResult:
    rng = SeedTree(0).generator("verify.invariance")
    failures = 0
    for _ in range(INVARIANCE_PAIRS):
        a, b = dyadic_box_pair(rng)
        scale = float(2.0 ** int(rng.integers(-3, 4)))
        dx, dy = (float(v) / 64.0 for v in rng.integers(-640, 641, size=2))
        before = relative_geometry(a, b)
        after = relative_geometry(transform_box(a, scale, dx, dy), transform_box(b, scale, dx, dy))
        if before.tobytes() != after.tobytes():
            failures += 1
    return CaseResult(
        "invariants",
        "relation features invariant to translation and scale",
        failures == 0,
        float(failures),
        f"{INVARIANCE_PAIRS} dyadic pairs, scales 2^-3..2^3",
    )


def _shape_contract() -> CaseResult:
    profile = get_profile("paper")
    rng = SeedTree(0).generator("verify.shapes")
    boxes = np.concatenate(
        [rng.uniform(0.2, 0.8, size=(5, 2)), rng.uniform(0.05, 0.3, size=(5, 2))], axis=1
    )
    params = ParameterSet()
    init_relation_params(params, profile.relenc, rng)
    features = relation_matrix(boxes, boxes)
    embedding = sincos_embed(features, profile.relenc)
    bias = encode_relation(boxes, boxes, params, profile.relenc)
    expected = (
        (5, 5, 4),
        (5, 5, 4 * profile.relenc.d_re),
        (5, 5, profile.relenc.heads),
    )
    shapes = (features.shape, embedding.shape, bias.shape)
    floor = float(bias.values.data.min())
    ok = shapes == expected and floor >= profile.relenc.epsilon
    return CaseResult("invariants", "relation shapes and epsilon floor", ok, floor, str(shapes))


def _bias_floor() -> CaseResult:
    profile = get_profile("toy")
    rng = SeedTree(0).generator("verify.floor")
    cfg = profile.relenc
    lowest = np.inf
    for _ in range(20):
        params = ParameterSet()
        params.add("relenc.weight", rng.uniform(-10, 10, size=(cfg.heads, cfg.embed_dim)))
        params.add("relenc.bias", rng.uniform(-10, 10, size=cfg.heads))
        boxes = np.concatenate(
            [rng.uniform(0, 1, size=(6, 2)), rng.uniform(0.01, 0.5, size=(6, 2))], axis=1
        )
        lowest = min(lowest, float(encode_relation(boxes, boxes, params, cfg).values.data.min()))
    return CaseResult("invariants", "bias floor under random heads", lowest >= cfg.epsilon, lowest)


def _constant_bias_neutrality() -> CaseResult:
    model = decoder_gradcheck_model(0)
    rng = SeedTree(0).generator("verify.neutral")
    n, heads = 5, model.decoder.heads
    x = Tensor(rng.normal(size=(n, model.decoder.d_model)))
    row_constant = np.repeat(rng.normal(size=(n, 1, heads)) * 30.0, n, axis=1)
    plain = multi_head_attention(x, x, x, model, "decoder.layers.0.self_attn")
    shifted = multi_head_attention(
        x, x, x, model, "decoder.layers.0.self_attn", bias=RelationBias(Tensor(row_constant))
    )
    gap = float(np.max(np.abs(plain.output.data - shifted.output.data)))
    row_error = max(
        float(np.max(np.abs(rows.data.sum(axis=-1) - 1.0)))
        for rows in (*plain.weights, *shifted.weights)
    )
    ok = gap <= 1e-12 and row_error <= 1e-9
    return CaseResult(
        "invariants",
        "row-constant bias leaves attention unchanged",
        ok,
        gap,
        f"row sums {row_error:.1e}",
    )


def _output_bytes(profile: Profile, seed: int, counters: PerfTracker | None = None) -> bytes:
    model = build_model(profile.decoder, profile.relenc, profile.memory, seed=seed)
    scene = generate_scenes(1, seed, "linear", num_classes=profile.decoder.num_classes)[0]
    matching, hybrid = init_queries(model)
    memory = build_memory(scene.objects, model, SeedTree(seed).generator("memory"))
    outputs = contrast_forward(matching, hybrid, memory, model, "infer", counters=counters)
    return b"".join(
        pred.boxes.data.tobytes() + pred.logits.data.tobytes() for pred in outputs.matching
    )


def _inference_purity() -> CaseResult:
    profile = get_profile("toy")
    counters = PerfTracker()
    reference = _output_bytes(profile, 3, counters)
    hybrid_ops = counters.total("hybrid.")
    matching_ops = counters.total("matching.")
    other = replace(
        profile,
        decoder=replace(profile.decoder, num_hybrid=profile.decoder.num_hybrid * 2 + 1, repeat=1),
    )
    same = _output_bytes(other, 3) == reference
    ok = hybrid_ops == 0 and matching_ops > 0 and same
    return CaseResult(
        "invariants",
        "inference runs no hybrid work and ignores N_h and K",
        ok,
        float(hybrid_ops),
        f"matching ops {matching_ops}, bytes equal {same}",
    )


def _prediction(boxes: np.ndarray, logits: np.ndarray) -> LayerPrediction:
    return LayerPrediction(boxes=Tensor(boxes), logits=Tensor(logits))


def _matching_discipline() -> CaseResult:
    gt = GroundTruth(np.array([[0.5, 0.5, 0.2, 0.3]]), np.array([1]))
    confident = np.array([-8.0, 8.0, -8.0])
    duplicated = _prediction(np.repeat(gt.boxes, 2, axis=0), np.stack([confident, confident]))
    background = _prediction(
        np.repeat(gt.boxes, 2, axis=0), np.stack([confident, np.full(3, -8.0)])
    )
    weights = LossWeights()
    dup_loss = one_to_one_loss([duplicated], gt, weights)
    clean_loss = one_to_one_loss([background], gt, weights)
    one_to_one_ok = (
        len(dup_loss.per_layer[0].assignment) == 1
        and dup_loss.classification > clean_loss.classification
    )

    repeat = 3
    stacked = _prediction(
        np.repeat(gt.boxes, repeat, axis=0), np.repeat(confident[None, :], repeat, axis=0)
    )
    many = one_to_many_loss([stacked], gt, repeat, weights)
    tiled = gt.tile(repeat)
    cost = matching_cost(stacked.boxes.data, stacked.logits.data, tiled, weights)
    oracle = brute_force_assignment(cost)
    assignment = many.per_layer[0].assignment
    one_to_many_ok = (
        len(assignment) == repeat
        and sorted(assignment.rows.tolist()) == list(range(repeat))
        and assignment.total_cost == oracle.total_cost
    )
    return CaseResult(
        "invariants",
        "one-to-one keeps one positive, K repeats allow K",
        one_to_one_ok and one_to_many_ok,
        float(len(assignment)),
        f"one-to-one {one_to_one_ok}, one-to-many {one_to_many_ok}",
    )


def double_loop_mc(boxes: list[Box]) -> float | None:
    n = len(boxes)
    if n < 2:
        return None
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                value = pearson4(boxes[i], boxes[j])
                total += abs(value) if value is not None else 0.0
    return total / (n * (n - 1))


def _mc_correctness() -> CaseResult:
    scenes = generate_scenes(MC_SCENES, 11, "none")
    worst = 0.0
    for scene in scenes:
        boxes = [Box(*row) for row in scene.objects.boxes]
        expected = double_loop_mc(boxes)
        actual = image_mc(boxes)
        if expected is None or actual is None:
            if expected is not actual:
                worst = np.inf
            continue
        worst = max(worst, abs(expected - actual))
    base = Box(1.0, 2.0, 4.0, 8.0)
    correlated = [
        Box(k * base.x, k * base.y, k * base.w, k * base.h) for k in (1.0, 2.0, 4.0, 0.5)
    ]
    full = image_mc(correlated)
    single = image_mc([base])
    ok = worst <= 1e-12 and full == 1.0 and single is None
    return CaseResult(
        "invariants",
        "image MC matches the double loop",
        ok,
        worst,
        f"{MC_SCENES} scenes, full correlation {full}, single box skipped {single is None}",
    )


def _training_neutrality() -> CaseResult:
    profile = get_profile("toy")
    profile = replace(profile, train=replace(profile.train, num_scenes=3))
    baseline, _ = run_experiment("baseline", NEUTRALITY_STEPS, 5, profile)
    model = build_model(profile.decoder, profile.relenc, profile.memory, seed=5)
    model.zero_relation()
    relation, _ = run_experiment("relation", NEUTRALITY_STEPS, 5, profile, model=model)
    same = [point.as_dict() for point in baseline.losses] == [
        point.as_dict() for point in relation.losses
    ]
    return CaseResult(
        "invariants",
        "zeroed relation head reproduces the baseline trajectory",
        same,
        float(len(relation.losses)),
        f"{NEUTRALITY_STEPS} steps",
    )


# ---------------------------------------------------------------- runner


def suite_cases(suite: str) -> list[Case]:
    """Return the cases of one suite (``all`` expands to every suite)."""
    if suite == "all":
        return [case for name in SUITES for case in suite_cases(name)]
    if suite == "gradcheck":
        cases = [
            Case("gradcheck", f"op {name}", lambda name=name: _op_case(name))
            for name in OP_BUILDERS
        ]
        cases.append(Case("gradcheck", "decoder", _decoder_case))
        return cases
    if suite == "hungarian":
        return [Case("hungarian", "oracle", _hungarian_case)]
    if suite == "invariants":
        return [
            Case("invariants", "relation invariance", _relation_invariance),
            Case("invariants", "shape contract", _shape_contract),
            Case("invariants", "bias floor", _bias_floor),
            Case("invariants", "constant bias", _constant_bias_neutrality),
            Case("invariants", "inference purity", _inference_purity),
            Case("invariants", "matching discipline", _matching_discipline),
            Case("invariants", "mc correctness", _mc_correctness),
            Case("invariants", "training neutrality", _training_neutrality),
        ]
    raise ValueError(f"Unknown suite: {suite}")


def _run_case(case: Case) -> CaseResult:
    try:
        result = case.run()
    except Exception as exc:
        LOGGER.error("case %s crashed: %s", case.name, exc, extra={"suite": case.suite})
        return CaseResult(case.suite, case.name, False, None, f"error: {exc}")
    level = logging.INFO if result.passed else logging.ERROR
    LOGGER.log(
        level,
        "%s: %s",
        result.name,
        "pass" if result.passed else "FAIL",
        extra={"suite": result.suite},
    )
    return result


def run_suites(suite: str, *, jobs: int = 1) -> list[CaseResult]:
    """Run every case of ``suite``; result order does not depend on ``jobs``."""
    return run_jobs(suite_cases(suite), jobs, _run_case)


def format_results(results: list[CaseResult]) -> str:
    """Render a fixed-width pass/fail table."""
    width = max((len(result.name) for result in results), default=4)
    lines = [f"{'suite':<11} {'case':<{width}}  result  metric"]
    for result in results:
        metric = "-" if result.metric is None else f"{result.metric:.3e}"
        status = "pass" if result.passed else "FAIL"
        lines.append(f"{result.suite:<11} {result.name:<{width}}  {status:<6}  {metric}")
    passed = sum(result.passed for result in results)
    lines.append(f"{passed}/{len(results)} cases passed")
    return "\n".join(lines)
