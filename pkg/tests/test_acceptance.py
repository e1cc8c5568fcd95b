"""Acceptance suite: one test per criterion, one printed verdict line each.

Verdict lines are emitted with capture suspended so they stay visible in
a plain ``pytest -v`` run. Every tolerance is asserted as stated; nothing
is loosened. Criterion 2 carries a reference F1 value that is
inconsistent with its own confusion matrix by 7.5e-5, beyond the 5e-5
tolerance, so that test fails by design; see the README note on known
discrepancies.
"""

import dataclasses
import time

import numpy as np

from koheval.dataset import Dataset, ImageRecord, stratified_split
from koheval.geometry import ARTEFACT, FUNGAL, Box, ImageDims, box_to_model, \
    box_to_source, letterbox_fit
from koheval.manifest import REFERENCE_PROTOCOL, manifest_conforms, \
    validate_manifest
from koheval.metrics import OperatingPoint, ap_sweep, average_precision, \
    counts_to_prf, evaluate_detections, match_image, pr_curve
from koheval.screening import ConfusionMatrix, threshold_sweep
from koheval.synth import SynthSpec, generate, plant_uniform_iou_cohort, \
    reference_ap, reference_match
from koheval.cli import main as cli_main

DIMS = ImageDims(2048, 2048)


def _announce(capfd, number: int, ok: bool, detail: str) -> None:
    with capfd.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}",
              flush=True)


def _seeded(entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _random_scene(rng, cap: int):
    gts, preds = [], []
    for class_id in (FUNGAL, ARTEFACT):
        for _ in range(int(rng.integers(0, cap + 1))):
            x = round(float(rng.uniform(0, 90)) / 10) * 10.0
            y = round(float(rng.uniform(0, 90)) / 10) * 10.0
            gts.append(Box(x, y, x + float(rng.uniform(5, 30)),
                           y + float(rng.uniform(5, 30)), class_id))
        for _ in range(int(rng.integers(0, cap + 1))):
            x = round(float(rng.uniform(0, 90)) / 10) * 10.0
            y = round(float(rng.uniform(0, 90)) / 10) * 10.0
            conf = round(float(rng.uniform(0, 1)), 1)
            preds.append(Box(x, y, x + float(rng.uniform(5, 30)),
                             y + float(rng.uniform(5, 30)), class_id,
                             confidence=conf))
    return gts, preds


def test_criterion_1_object_level_consistency(capfd):
    started = time.perf_counter()
    precision, recall, f1 = counts_to_prf(37, 9, 1)
    deltas = (abs(precision - 0.8043), abs(recall - 0.9737),
              abs(f1 - 0.8810))
    ok = all(d <= 5e-5 for d in deltas)
    elapsed = time.perf_counter() - started
    ok = ok and elapsed < 1.0
    _announce(capfd, 1, ok,
              f"counts (37,9,1) -> P/R/F1 {precision:.6f}/{recall:.6f}/"
              f"{f1:.6f}, max delta {max(deltas):.1e} (tol 5e-5), "
              f"{elapsed:.3f}s")
    assert ok


def test_criterion_2_image_level_consistency(capfd):
    started = time.perf_counter()
    matrix = ConfusionMatrix(tp=89, fn=0, fp=3, tn=162)
    marginals_ok = matrix.gt_positives == 89 and matrix.gt_negatives == 165
    checks = {
        "accuracy": (matrix.accuracy, 0.9882),
        "precision": (matrix.precision, 0.9674),
        "f1": (matrix.f1, 0.9835),
        "sensitivity": (matrix.sensitivity, 1.0000),
    }
    deltas = {name: abs(actual - expected)
              for name, (actual, expected) in checks.items()}
    failing = sorted(name for name, d in deltas.items() if d > 5e-5)
    elapsed = time.perf_counter() - started
    ok = marginals_ok and not failing and elapsed < 1.0
    if failing:
        worst = max(failing, key=lambda n: deltas[n])
        detail = (f"matrix (89,0,3,162): {worst} {checks[worst][0]:.6f} "
                  f"differs from {checks[worst][1]} by {deltas[worst]:.1e} "
                  f"(tol 5e-5); other checks pass")
    else:
        detail = (f"matrix (89,0,3,162) reproduces all rates within 5e-5, "
                  f"{elapsed:.3f}s")
    _announce(capfd, 2, ok, detail)
    assert ok


def test_criterion_3_matcher_oracle_equivalence(capfd):
    started = time.perf_counter()
    rng = _seeded((301, 0))
    ops = (OperatingPoint(),
           OperatingPoint(conf_threshold=0.05, iou_threshold=0.30),
           OperatingPoint(conf_threshold=0.55, iou_threshold=0.75))
    mismatches = 0
    trials = 1000
    for trial in range(trials):
        gts, preds = _random_scene(rng, cap=50)
        op = ops[trial % len(ops)]
        if match_image(gts, preds, op) != reference_match(gts, preds, op):
            mismatches += 1
    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and elapsed < 30.0
    _announce(capfd, 3, ok,
              f"match_image == reference_match on {trials} random scenes "
              f"(<=50 boxes/class), {mismatches} mismatches, {elapsed:.1f}s")
    assert ok


def test_criterion_4_ap_oracle_equivalence(capfd):
    started = time.perf_counter()
    rng = _seeded((401, 0))
    worst = 0.0
    curves = 0
    while curves < 1000:
        gts, preds = _random_scene(rng, cap=12)
        class_id = FUNGAL if curves % 2 == 0 else ARTEFACT
        if not any(b.class_id == class_id for b in gts):
            continue
        threshold = float(rng.uniform(0.2, 0.9))
        curve = pr_curve([(gts, preds)], class_id, threshold)
        for mode in ("101", "all"):
            worst = max(worst, abs(average_precision(curve, mode)
                                   - reference_ap(curve, mode)))
        curves += 1

    # A perfect detector: predictions identical to the ground truth.
    dataset, _ = generate(SynthSpec(n_images=5, seed=5, fungal_per_image=(1, 3)))
    perfect = [(r.ground_truth,
                [dataclasses.replace(b, confidence=0.9) for b in r.ground_truth])
               for r in dataset.records]
    p50, p50_95 = ap_sweep(perfect, FUNGAL)
    uniform = plant_uniform_iou_cohort(8)
    scenes = [(r.ground_truth, r.predictions) for r in uniform.records]
    u50, u50_95 = ap_sweep(scenes, FUNGAL)

    elapsed = time.perf_counter() - started
    ok = (worst <= 1e-12 and p50 == 1.0 and p50_95 == 1.0
          and u50_95 == 0.5 and elapsed < 30.0)
    _announce(capfd, 4, ok,
              f"AP oracle within {worst:.1e} over {curves} curves; perfect "
              f"detector AP {p50}/{p50_95}; uniform-0.70 cohort ap50_95 "
              f"{u50_95}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_generator_closed_loop(tmp_path, capfd):
    started = time.perf_counter()
    rng = _seeded((501, 0))
    count_failures = 0
    iou_failures = 0
    specs = 0
    while specs < 100:
        spec = SynthSpec(
            n_images=int(rng.integers(4, 10)),
            fungal_per_image=(0, int(rng.integers(1, 4))),
            artefact_per_image=(0, int(rng.integers(0, 3))),
            tp_rate=float(rng.uniform(0.2, 1.0)),
            fp_extra_rate=float(rng.uniform(0.0, 0.8)),
            iou_mean=float(rng.uniform(0.6, 0.9)),
            iou_spread=float(rng.uniform(0.0, 0.15)),
            seed=int(rng.integers(0, 2**31)),
        )
        dataset, truth = generate(spec)
        metrics = evaluate_detections(dataset.records)
        for class_id in (FUNGAL, ARTEFACT):
            m = metrics.per_class[class_id]
            if (m.tp, m.fp, m.fn) != truth.expected_counts(class_id):
                count_failures += 1
            planted = truth.planted_mean_iou(class_id)
            if planted is None:
                if m.mean_iou is not None:
                    iou_failures += 1
            elif m.mean_iou is None or abs(m.mean_iou - planted) > 1e-3:
                iou_failures += 1
        specs += 1

    obj_dir = tmp_path / "obj"
    assert cli_main(["synth", "--plant-counts", "37,9,1", "--seed", "3",
                     "--out", str(obj_dir)]) == 0
    capfd.readouterr()
    assert cli_main(["evaluate", str(obj_dir)]) == 0
    eval_out = capfd.readouterr().out
    eval_ok = all(s in eval_out for s in ("0.8043", "0.9737", "0.8810"))

    screen_dir = tmp_path / "screen"
    assert cli_main(["synth", "--plant-matrix", "89,0,3,162", "--seed", "5",
                     "--out", str(screen_dir)]) == 0
    capfd.readouterr()
    assert cli_main(["screen", str(screen_dir), "--fail-on-fn"]) == 0
    screen_out = capfd.readouterr().out
    screen_ok = all(s in screen_out for s in
                    ("89", "162", "0.9882", "1.0000", "0.9674"))

    elapsed = time.perf_counter() - started
    ok = (count_failures == 0 and iou_failures == 0 and eval_ok
          and screen_ok and elapsed < 60.0)
    _announce(capfd, 5, ok,
              f"{specs} random specs: {count_failures} count / "
              f"{iou_failures} mean-IoU failures; planted cohorts via CLI "
              f"reproduce the criterion 1 and 2 figures "
              f"({'yes' if eval_ok and screen_ok else 'no'}), {elapsed:.1f}s")
    assert ok


def test_criterion_6_letterbox_geometry(capfd):
    started = time.perf_counter()
    t = letterbox_fit(DIMS, ImageDims(1024, 1024))
    square_ok = t.scale == 0.5 and t.pad_x == 0.0 and t.pad_y == 0.0

    rng = _seeded((601, 0))
    worst = 0.0
    pairs = 0
    while pairs < 10000:
        source = ImageDims(int(rng.integers(32, 4097)),
                           int(rng.integers(32, 4097)))
        target = ImageDims(int(rng.integers(32, 2049)),
                           int(rng.integers(32, 2049)))
        transform = letterbox_fit(source, target)
        x = np.sort(rng.uniform(0, source.width, 2))
        y = np.sort(rng.uniform(0, source.height, 2))
        if x[1] - x[0] < 1e-3 or y[1] - y[0] < 1e-3:
            continue
        box = Box(float(x[0]), float(y[0]), float(x[1]), float(y[1]), FUNGAL)
        back = box_to_source(box_to_model(box, transform), transform)
        worst = max(worst,
                    abs(back.x_min - box.x_min), abs(back.y_min - box.y_min),
                    abs(back.x_max - box.x_max), abs(back.y_max - box.y_max))
        pairs += 1
    elapsed = time.perf_counter() - started
    ok = square_ok and worst < 1e-6 and elapsed < 5.0
    _announce(capfd, 6, ok,
              f"2048->1024 scale {t.scale} pad ({t.pad_x}, {t.pad_y}); "
              f"round-trip worst error {worst:.2e} over {pairs} pairs "
              f"(tol 1e-6), {elapsed:.1f}s")
    assert ok


def _registry_2540() -> Dataset:
    records = []
    compositions = (((True, False), 800), ((True, True), 900),
                    ((False, True), 500), ((False, False), 340))
    i = 0
    for (has_f, has_a), count in compositions:
        for _ in range(count):
            gt = []
            if has_f:
                gt.append(Box(10.0, 10.0, 200.0, 60.0, FUNGAL))
            if has_a:
                gt.append(Box(500.0, 500.0, 620.0, 640.0, ARTEFACT))
            records.append(ImageRecord(f"frame-{i:05d}", DIMS, gt))
            i += 1
    return Dataset(records)


def test_criterion_7_split_reproducibility(capfd):
    started = time.perf_counter()
    dataset = _registry_2540()
    first = stratified_split(dataset, seed=20)
    second = stratified_split(dataset, seed=20)
    shuffled = Dataset(list(reversed(dataset.records)))
    third = stratified_split(shuffled, seed=20)
    sizes = (len(first.train), len(first.val), len(first.test))

    proportional = True
    train = set(first.train)
    val = set(first.val)
    for stratum in ((True, False), (True, True), (False, True), (False, False)):
        ids = [r.image_id for r in dataset.records
               if r.composition_stratum() == stratum]
        n_train = sum(1 for x in ids if x in train)
        n_val = sum(1 for x in ids if x in val)
        if abs(n_train - 0.8 * len(ids)) > 1 or abs(n_val - 0.1 * len(ids)) > 1:
            proportional = False

    elapsed = time.perf_counter() - started
    ok = (sizes == (2032, 254, 254) and first == second == third
          and proportional and elapsed < 5.0)
    _announce(capfd, 7, ok,
              f"2,540-image registry -> {sizes[0]}/{sizes[1]}/{sizes[2]}, "
              f"repeatable and order-independent, strata within +/-1, "
              f"{elapsed:.1f}s")
    assert ok


def test_criterion_8_monotonicity(capfd):
    started = time.perf_counter()
    thresholds = [round(0.05 + 0.1 * k, 2) for k in range(10)]
    object_ok = True
    image_ok = True
    cohorts = 0
    for seed in range(20):
        dataset, _ = generate(SynthSpec(
            n_images=10, seed=seed,
            fungal_per_image=(0, 3), artefact_per_image=(0, 2),
            tp_rate=0.7, fp_extra_rate=0.5,
        ))
        tps, fps = [], []
        for t in thresholds:
            op = OperatingPoint(conf_threshold=t)
            tp = fp = 0
            for record in dataset:
                report = match_image(record.ground_truth,
                                     record.predictions, op)
                tp += len(report.tp_pairs)
                fp += len(report.fp_pred_indices)
            tps.append(tp)
            fps.append(fp)
        if any(b > a for a, b in zip(tps, tps[1:])):
            object_ok = False
        if any(b > a for a, b in zip(fps, fps[1:])):
            object_ok = False

        sweep = threshold_sweep(dataset.records, thresholds)
        sens = [m.sensitivity for _, m in sweep]
        spec = [m.specificity for _, m in sweep]
        for series, direction in ((sens, -1), (spec, +1)):
            values = [v for v in series if v is not None]
            assert len(values) in (0, len(series))
            if any((b - a) * direction < 0
                   for a, b in zip(values, values[1:])):
                image_ok = False
        cohorts += 1
    elapsed = time.perf_counter() - started
    ok = object_ok and image_ok and elapsed < 30.0
    _announce(capfd, 8, ok,
              f"{cohorts} cohorts x {len(thresholds)} thresholds: tp/fp "
              f"non-increasing ({'yes' if object_ok else 'no'}), sensitivity "
              f"down / specificity up ({'yes' if image_ok else 'no'}), "
              f"{elapsed:.1f}s")
    assert ok


def test_criterion_9_manifest_validation(capfd):
    started = time.perf_counter()
    reference_ok = manifest_conforms(validate_manifest(REFERENCE_PROTOCOL))

    perturbations = {
        "epochs": 300, "optimizer": "SGD", "initial_lr": 5e-3,
        "cosine_warmup": False, "batch_size": 16, "box_loss_weight": 5.0,
        "cls_loss_weight": 0.5, "patience": 100, "flip_prob": 0.5,
        "scale_jitter": 0.1, "translate_jitter": 0.1,
        "rotation_jitter_deg": 10.0, "mixup_enabled": True,
        "input_size": 640, "confidence_threshold": 0.5,
    }
    all_flagged = True
    for field, value in perturbations.items():
        mutated = dataclasses.replace(REFERENCE_PROTOCOL, **{field: value})
        verdicts = validate_manifest(mutated)
        flagged = [v.field for v in verdicts if not v.ok]
        if flagged != [field]:
            all_flagged = False
    elapsed = time.perf_counter() - started
    ok = reference_ok and all_flagged and elapsed < 1.0
    _announce(capfd, 9, ok,
              f"reference protocol passes; {len(perturbations)}/"
              f"{len(perturbations)} single-field perturbations flagged, "
              f"{elapsed:.3f}s")
    assert ok
