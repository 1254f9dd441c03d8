"""Stage runners wiring the modules into reproducible file-driven runs.

Each stage writes its artifact plus a report.json embedding the config hash,
so a run directory carries a verifiable hash chain. The study runner composes
the stages end-to-end and emits the method-comparison table.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from maskforge import fixtures as fx
from maskforge.augmentation import (
    AugmentedSample,
    TransformParams,
    composite_over,
    composite_under,
    generate_pairs,
    transform_mask,
)
from maskforge.config import PipelineConfig
from maskforge.core.manifest import DatasetManifest, SampleEntry
from maskforge.core.seeding import derive_seed
from maskforge.core.serial import load_png, save_png
from maskforge.core.types import Frame, MaskRecord, write_masks_jsonl
from maskforge.dataset import emit_dataset, make_deployment_set
from maskforge.embedding import (
    EmbeddingMatrix,
    embed_bitmap,
    load_embeddings,
    store_embeddings,
    synthetic_image_embed,
    synthetic_text_embed,
)
from maskforge.errors import MaskforgeError, ParameterError
from maskforge.evaluation import EvalReport, evaluate
from maskforge.filtering import (
    FilterConfig,
    TextPrompt,
    run_filter_pipeline,
)
from maskforge.probe import Batch, ProbeModel, TrainConfig, predict_batch, pretrain_then_finetune, train
from maskforge.segmentation import SyntheticSegmenter, import_masks, segment_corpus

PROTOCOLS = ("supervised_only", "ssl_only", "multi_task", "pretrain_finetune")


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; results identical regardless of worker count."""
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _write_report(directory: Path, stage: str, cfg: PipelineConfig, payload: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"stage": stage, "config_hash": cfg.hash()}
    doc.update(payload)
    (directory / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _expect(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MaskforgeError(f"missing upstream artifact {path}; run `{producer}` first")
    return path


def _load_frames(frames_dir: Path) -> dict[str, Frame]:
    frames = {}
    for png in sorted(frames_dir.glob("*.png")):
        pixels = load_png(png)
        frames[png.stem] = Frame(
            id=png.stem, width=pixels.shape[1], height=pixels.shape[0], pixels=pixels
        )
    return frames


# ---------------------------------------------------------------------------
# corpus stages

def stage_fixture_gen(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    out = Path(out_root) / "fixtures"
    scene_cfg = cfg.scene_config()
    count = int(cfg.doc["fixtures"]["count"])
    scenes = parallel_map(lambda i: fx.gen_scene(scene_cfg, i), range(count), workers)

    frames_dir = out / "frames"
    parallel_map(
        lambda pair: save_png(frames_dir / f"{pair[0].id}.png", pair[0].pixels),
        scenes,
        workers,
    )
    fx.write_truth_jsonl(scenes, out / "truth.jsonl")
    all_masks = [m for _, t in scenes for m in t.masks] + [t.weapon_mask for _, t in scenes]
    write_masks_jsonl(sorted(all_masks, key=lambda m: m.id), out / "masks.jsonl")
    from maskforge.filtering import histogram

    hist = histogram(m.label for _, t in scenes for m in t.masks)
    (out / "histogram.json").write_text(
        json.dumps([[label, count_] for label, count_ in hist], indent=2) + "\n"
    )
    _write_report(out, "fixture-gen", cfg, {
        "scenes": count,
        "masks": len(all_masks),
        "clipping_scenes": sum(1 for _, t in scenes if t.is_clipping),
    })
    return out


def stage_segment(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    out_root = Path(out_root)
    out = out_root / "segment"
    truth_path = _expect(out_root / "fixtures" / "truth.jsonl", "fixture-gen")
    frames = _load_frames(_expect(out_root / "fixtures" / "frames", "fixture-gen"))
    truth = fx.read_truth_jsonl(truth_path)
    candidates = {
        frame_id: list(gt.masks) + [gt.weapon_mask] for frame_id, gt in truth.items()
    }
    segmenter = SyntheticSegmenter(candidates)
    masks = segment_corpus(segmenter, list(frames.values()), cfg.prompt_spec(), workers)
    write_masks_jsonl(masks, out / "masks.jsonl")
    _write_report(out, "segment", cfg, {
        "frames": len(frames),
        "masks": len(masks),
        "grid_points_per_side": cfg.prompt_spec().grid_points_per_side,
    })
    return out


def stage_embed(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    out_root = Path(out_root)
    out = out_root / "embed"
    masks = import_masks(_expect(out_root / "segment" / "masks.jsonl", "segment"))
    frames = _load_frames(_expect(out_root / "fixtures" / "frames", "fixture-gen"))
    masks = sorted(masks, key=lambda m: m.id)

    def embed_one(mask: MaskRecord):
        return synthetic_image_embed(frames[mask.frame_id], mask)

    records = parallel_map(embed_one, masks, workers)
    matrix = EmbeddingMatrix.from_records(records)
    store_embeddings(matrix, out / "embeddings.bin")
    _write_report(out, "embed", cfg, {"count": len(matrix), "dim": matrix.dim})
    return out


def _calibrate_tau(
    prompt: dict, matrix: EmbeddingMatrix, labels: dict[str, str | None]
) -> float:
    """Midpoint between own-category and sprite similarities; needs labels."""
    token = prompt["text"]
    proto = synthetic_text_embed(token).vector.astype(np.float64)
    sims = matrix.data.astype(np.float64) @ proto
    own = [s for s, mid in zip(sims, matrix.ids) if labels.get(mid) == token]
    backgrounds = set(fx.BACKGROUND_CATEGORIES) | {fx.WEAPON_LABEL}
    rest = [s for s, mid in zip(sims, matrix.ids) if labels.get(mid) not in backgrounds]
    if not own:
        return float((max(rest) + 1.0) / 2) if rest else 0.5
    if not rest:
        return float(min(own) - 0.05)
    return float((min(own) + max(rest)) / 2)


def resolve_filter_config(
    cfg: PipelineConfig, matrix: EmbeddingMatrix, labels: dict[str, str | None]
) -> FilterConfig:
    """Build the FilterConfig, auto-calibrating any prompt with tau null."""
    section = cfg.doc["filter"]
    prompts = []
    for prompt in section["text_prompts"]:
        tau = prompt.get("tau")
        if tau is None:
            tau = _calibrate_tau(prompt, matrix, labels)
        prompts.append(TextPrompt(str(prompt["text"]), str(prompt["mode"]), float(tau)))
    return FilterConfig(
        k=section["k"],
        k_min=int(section["k_min"]),
        k_max=int(section["k_max"]),
        linkage=str(section["linkage"]),
        per_cluster_quota=section["per_cluster_quota"],
        dedup_tau=section["dedup_tau"],
        text_prompts=tuple(prompts),
        stage_seed=derive_seed(cfg.seed, "filter"),
    )


def stage_filter(cfg: PipelineConfig, out_root: Path, dry_run: bool = False) -> Path:
    out_root = Path(out_root)
    out = out_root / "filter"
    masks = import_masks(_expect(out_root / "segment" / "masks.jsonl", "segment"))
    matrix = load_embeddings(_expect(out_root / "embed" / "embeddings.bin", "embed"))
    labels = {m.id: m.label for m in masks}
    filter_cfg = resolve_filter_config(cfg, matrix, labels)
    result = run_filter_pipeline(masks, matrix, filter_cfg)
    payload = {
        "dry_run": dry_run,
        "filter_config": filter_cfg.to_json(),
        **result.report_json(),
    }
    _write_report(out, "filter", cfg, payload)
    if not dry_run:
        (out / "kept_ids.json").write_text(json.dumps(result.kept_ids, indent=2) + "\n")
        if result.assignment is not None:
            (out / "assignment.json").write_text(
                json.dumps(
                    {
                        "k": result.assignment.k,
                        "assignment": result.assignment.assignment,
                        "merge_tree": [list(e) for e in result.assignment.merge_tree],
                    },
                    sort_keys=True,
                    indent=2,
                )
                + "\n"
            )
    return out


# ---------------------------------------------------------------------------
# targets and augmentation

def gen_targets(cfg: PipelineConfig) -> list:
    """Labeled-good exemplars from held-out scenes (never clipping)."""
    n = int(cfg.doc["study"]["n_targets"])
    scene_cfg = cfg.scene_config(clip_probability=0.0, seed=derive_seed(cfg.seed, "targets"))
    return [fx.target_exemplar(fx.gen_scene(scene_cfg, i)[0], scene_cfg) for i in range(n)]


def stage_targets(cfg: PipelineConfig, out_root: Path) -> Path:
    out = Path(out_root) / "targets"
    targets = gen_targets(cfg)
    frames_dir = out / "frames"
    for target in targets:
        save_png(frames_dir / f"{target.frame.id}.png", target.frame.pixels)
    write_masks_jsonl([t.prior_mask for t in targets], out / "priors.jsonl")
    _write_report(out, "targets", cfg, {"count": len(targets)})
    return out


def _load_targets(out_root: Path):
    from maskforge.core.types import TargetExemplar, read_masks_jsonl

    targets_dir = _expect(Path(out_root) / "targets" / "frames", "augment")
    priors = read_masks_jsonl(Path(out_root) / "targets" / "priors.jsonl")
    frames = _load_frames(targets_dir)
    by_frame = {p.frame_id: p for p in priors}
    return [
        TargetExemplar(frame=frames[fid], prior_mask=by_frame[fid])
        for fid in sorted(frames)
    ]


def stage_augment(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    """Pairing plan: provenance-only samples, one positive and one negative per pair."""
    out_root = Path(out_root)
    out = out_root / "augment"
    kept_path = _expect(out_root / "filter" / "kept_ids.json", "filter")
    kept_ids = set(json.loads(kept_path.read_text()))
    masks = [m for m in import_masks(out_root / "segment" / "masks.jsonl") if m.id in kept_ids]
    frames = _load_frames(out_root / "fixtures" / "frames")
    stage_targets(cfg, out_root)
    targets = _load_targets(out_root)
    samples = generate_pairs(
        masks,
        frames,
        targets,
        cfg.aug_profile(),
        seed=derive_seed(cfg.seed, "augment"),
        render=False,
        workers=workers,
    )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pairs.jsonl", "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(
                {
                    "sample_id": sample.sample_id,
                    "class": sample.class_name,
                    "provenance": sample.provenance,
                },
                sort_keys=True,
            ))
            fh.write("\n")
    positives = sum(1 for s in samples if s.class_name == "positive")
    _write_report(out, "augment", cfg, {
        "pairs": len(samples) // 2,
        "samples": len(samples),
        "positives": positives,
        "profile": cfg.aug_profile().name,
    })
    return out


def read_pairs(path: Path) -> list[AugmentedSample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            samples.append(AugmentedSample(
                sample_id=doc["sample_id"],
                class_name=doc["class"],
                provenance=doc["provenance"],
                image=None,
            ))
    return samples


def render_sample(
    sample: AugmentedSample,
    masks_by_id: dict[str, MaskRecord],
    frames: dict[str, Frame],
    targets_by_frame: dict[str, object],
) -> AugmentedSample:
    """Re-render a provenance-only sample; bit-identical to the original render."""
    prov = sample.provenance
    mask = masks_by_id[prov["source_mask_id"]]
    source = frames[prov["source_frame_id"]]
    target = targets_by_frame[prov["target_frame_id"]]
    t = prov["transform"]
    params = TransformParams(
        rotation_deg=float(t["rotation_deg"]),
        hflip=bool(t["hflip"]),
        placement=tuple(int(v) for v in t["placement"]),
        scale=float(t["scale"]),
        seed=int(t["seed"]),
    )
    patch, bitmap = transform_mask(source, mask, params)
    if sample.class_name == "positive":
        image = composite_over(target, patch, bitmap, params.placement)
    else:
        image = composite_under(target, patch, bitmap, params.placement)
    return AugmentedSample(
        sample_id=sample.sample_id,
        class_name=sample.class_name,
        provenance=sample.provenance,
        image=image,
    )


def stage_emit(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    out_root = Path(out_root)
    out = out_root / "dataset"
    pairs = read_pairs(_expect(out_root / "augment" / "pairs.jsonl", "augment"))
    masks_by_id = {m.id: m for m in import_masks(out_root / "segment" / "masks.jsonl")}
    frames = _load_frames(out_root / "fixtures" / "frames")
    targets = {t.frame.id: t for t in _load_targets(out_root)}
    rendered = parallel_map(
        lambda s: render_sample(s, masks_by_id, frames, targets), pairs, workers
    )
    manifest = emit_dataset(rendered, out, config_hash=cfg.hash())
    _write_report(out, "emit", cfg, {
        "samples": len(manifest.samples),
        "positives": manifest.positives,
        "prevalence": manifest.prevalence,
    })
    return out


# ---------------------------------------------------------------------------
# deployment and features

def _deploy_pools(cfg: PipelineConfig, workers: int = 1):
    """Render positive (forced-clip) and negative scene pools for deployment."""
    deploy_cfg = cfg.deployment_config(seed=derive_seed(cfg.seed, "deploy"))
    n_pos = deploy_cfg.positive_count
    n_neg = deploy_cfg.size - n_pos
    pos_cfg = cfg.scene_config(clip_probability=1.0, seed=derive_seed(cfg.seed, "deploy-pos"))
    neg_cfg = cfg.scene_config(clip_probability=0.0, seed=derive_seed(cfg.seed, "deploy-neg"))
    pos_scenes = parallel_map(lambda i: fx.gen_scene(pos_cfg, i), range(n_pos), workers)
    neg_scenes = parallel_map(lambda i: fx.gen_scene(neg_cfg, i), range(n_neg), workers)
    return deploy_cfg, pos_scenes, neg_scenes


def stage_deploy(cfg: PipelineConfig, out_root: Path, workers: int = 1):
    out = Path(out_root) / "deploy"
    deploy_cfg, pos_scenes, neg_scenes = _deploy_pools(cfg, workers)
    pixels_by_id = {}
    pools = {"positive": [], "negative": []}
    for scenes, cls, prefix in ((pos_scenes, "positive", "pos"), (neg_scenes, "negative", "neg")):
        for frame, truth in scenes:
            sample_id = f"{prefix}-{frame.id}"
            pixels_by_id[sample_id] = frame.pixels
            pools[cls].append(SampleEntry(
                sample_id=sample_id,
                image_path=f"images/{sample_id}.png",
                class_name=cls,
                provenance={"frame_id": frame.id, "is_clipping": truth.is_clipping},
            ))
    manifest = make_deployment_set(pools["positive"], pools["negative"], deploy_cfg)
    manifest.config_hash = cfg.hash()
    parallel_map(
        lambda e: save_png(out / e.image_path, pixels_by_id[e.sample_id]),
        manifest.samples,
        workers,
    )
    manifest.save(out / "manifest.json")
    _write_report(out, "deploy-set", cfg, {
        "size": len(manifest.samples),
        "positives": manifest.positives,
        "prevalence": manifest.prevalence,
    })
    return out, manifest, pixels_by_id


def _crop_bitmap(cfg: PipelineConfig) -> np.ndarray:
    """Rectangular crop prior over the weapon bbox, frame-sized."""
    scene_cfg = cfg.scene_config()
    x, y, w, h = fx.prior_region_bbox(scene_cfg)
    bitmap = np.zeros((scene_cfg.height, scene_cfg.width), dtype=bool)
    bitmap[y : y + h, x : x + w] = True
    return bitmap


def features_for_images(
    items: Sequence[tuple[str, np.ndarray, int]],
    crop: np.ndarray,
    workers: int = 1,
) -> Batch:
    """Embed the crop-prior region of each (id, pixels, label) image."""

    def embed_one(item):
        sample_id, pixels, _ = item
        frame = Frame(
            id=sample_id, width=pixels.shape[1], height=pixels.shape[0], pixels=pixels
        )
        return embed_bitmap(sample_id, frame, crop).vector

    vectors = parallel_map(embed_one, items, workers)
    return Batch(
        features=np.stack(vectors) if vectors else np.zeros((0, 64)),
        labels=np.array([label for _, _, label in items], dtype=np.float64),
    )


def manifest_features(
    manifest: DatasetManifest,
    dataset_dir: Path,
    crop: np.ndarray,
    workers: int = 1,
    pixels_by_id: dict[str, np.ndarray] | None = None,
) -> Batch:
    items = []
    for entry in manifest.samples:
        if pixels_by_id is not None and entry.sample_id in pixels_by_id:
            pixels = pixels_by_id[entry.sample_id]
        else:
            pixels = load_png(dataset_dir / entry.image_path)
        items.append((entry.sample_id, pixels, 1 if entry.class_name == "positive" else 0))
    return features_for_images(items, crop, workers)


def supervised_batch(cfg: PipelineConfig, trial_seed: int, crop: np.ndarray,
                     workers: int = 1) -> Batch:
    """The small labeled set: in-distribution scenes at a balanced clip rate."""
    n = int(cfg.doc["study"]["supervised_labels"])
    scene_cfg = cfg.scene_config(clip_probability=0.5, seed=trial_seed)
    id_cfg = scene_cfg.restricted(scene_cfg.id_categories)
    scenes = parallel_map(lambda i: fx.gen_scene(id_cfg, i), range(n), workers)
    items = [
        (frame.id, frame.pixels, 1 if truth.is_clipping else 0)
        for frame, truth in scenes
    ]
    return features_for_images(items, crop, workers)


# ---------------------------------------------------------------------------
# training protocols and the study

def run_protocol(
    protocol: str,
    weak: Batch,
    supervised: Batch,
    cfg: PipelineConfig,
    seed: int,
) -> tuple[ProbeModel, dict]:
    if protocol == "supervised_only":
        model, trace = train(Batch.empty(supervised.features.shape[1]), supervised,
                             cfg.train_config(lam=0.0, seed=seed))
        return model, {"trace": trace}
    if protocol == "ssl_only":
        model, trace = train(weak, Batch.empty(weak.features.shape[1]),
                             cfg.train_config(lam=1.0, seed=seed))
        return model, {"trace": trace}
    if protocol == "multi_task":
        model, trace = train(weak, supervised, cfg.train_config(seed=seed))
        return model, {"trace": trace}
    if protocol == "pretrain_finetune":
        model, trace_pre, trace_ft = pretrain_then_finetune(
            weak, supervised,
            cfg.train_config(lam=1.0, seed=seed),
            cfg.finetune_config(seed=derive_seed(seed, "ft")),
        )
        return model, {"trace": trace_pre, "trace_ft": trace_ft}
    raise ParameterError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")


def run_study(cfg: PipelineConfig, out_root: Path, workers: int = 1) -> Path:
    out_root = Path(out_root)
    out = out_root / "study"
    stage_fixture_gen(cfg, out_root, workers)
    stage_segment(cfg, out_root, workers)
    stage_embed(cfg, out_root, workers)
    stage_filter(cfg, out_root)
    stage_augment(cfg, out_root, workers)

    kept_ids = set(json.loads((out_root / "filter" / "kept_ids.json").read_text()))
    masks = [m for m in import_masks(out_root / "segment" / "masks.jsonl") if m.id in kept_ids]
    frames = _load_frames(out_root / "fixtures" / "frames")
    targets = _load_targets(out_root)

    _, deploy_manifest, deploy_pixels = stage_deploy(cfg, out_root, workers)
    crop = _crop_bitmap(cfg)
    deploy_batch = manifest_features(
        deploy_manifest, out_root / "deploy", crop, workers, pixels_by_id=deploy_pixels
    )

    threshold = float(cfg.doc["study"]["threshold"])
    trials = int(cfg.doc["study"]["trials"])
    results: dict[str, list[dict]] = {p: [] for p in PROTOCOLS}
    for trial in range(trials):
        trial_seed = derive_seed(cfg.seed, "trial", trial)
        weak_samples = generate_pairs(
            masks, frames, targets, cfg.aug_profile(),
            seed=trial_seed, render=True, workers=workers,
        )
        trial_dir = out / f"trial{trial:02d}"
        weak_manifest = emit_dataset(
            weak_samples, trial_dir, config_hash=cfg.hash(), write_images=False
        )
        weak_batch = features_for_images(
            [(s.sample_id, s.image, 1 if s.class_name == "positive" else 0)
             for s in weak_samples],
            crop,
            workers,
        )
        supervised = supervised_batch(
            cfg, derive_seed(cfg.seed, "supervised", trial), crop, workers
        )
        for protocol in PROTOCOLS:
            model, _ = run_protocol(protocol, weak_batch, supervised, cfg, trial_seed)
            scores = predict_batch(model, deploy_batch.features)
            report = evaluate(scores, deploy_batch.labels.astype(int), threshold,
                              dataset_hash=deploy_manifest.config_hash)
            results[protocol].append(report.metrics)

    compare = {
        "config_hash": cfg.hash(),
        "trials": trials,
        "threshold": threshold,
        "deployment": {
            "size": len(deploy_manifest.samples),
            "prevalence": deploy_manifest.prevalence,
        },
        "methods": {
            protocol: {
                "per_trial_f1": [m["f1"] for m in metrics],
                "median_f1": statistics.median(m["f1"] for m in metrics),
                "median_balanced_accuracy": statistics.median(
                    m["balanced_accuracy"] for m in metrics
                ),
            }
            for protocol, metrics in results.items()
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(compare, sort_keys=True, indent=2) + "\n")
    _write_report(out, "study", cfg, {
        "methods": sorted(PROTOCOLS),
        "median_f1": {p: compare["methods"][p]["median_f1"] for p in PROTOCOLS},
    })
    return out


# ---------------------------------------------------------------------------
# standalone train/eval stages

def stage_train(
    cfg: PipelineConfig,
    out_root: Path,
    protocol: str = "pretrain_finetune",
    lam_grid: Sequence[float] | None = None,
    workers: int = 1,
) -> Path:
    out_root = Path(out_root)
    out = out_root / "train"
    dataset_dir = _expect(out_root / "dataset" / "manifest.json", "emit").parent
    manifest = DatasetManifest.load(dataset_dir / "manifest.json")
    crop = _crop_bitmap(cfg)
    weak = manifest_features(manifest, dataset_dir, crop, workers)
    supervised = supervised_batch(cfg, derive_seed(cfg.seed, "supervised", 0), crop, workers)
    seed = derive_seed(cfg.seed, "train")
    lams = list(lam_grid) if lam_grid else [None]
    trained = []
    for lam in lams:
        local_cfg = cfg
        if lam is not None:
            doc = json.loads(json.dumps(cfg.doc))
            doc["train"]["lambda"] = lam
            local_cfg = PipelineConfig(doc=doc)
        model, extras = run_protocol(protocol, weak, supervised, local_cfg, seed)
        suffix = "" if lam is None else f"-lambda{lam:g}"
        model.save(out / f"model{suffix}.json", extra={"config_hash": cfg.hash(),
                                                       "protocol": protocol})
        extras["trace"].save_csv(out / f"trace{suffix}.csv")
        trained.append({"lambda": lam, "model": f"model{suffix}.json"})
    _write_report(out, "train", cfg, {
        "protocol": protocol,
        "weak_samples": len(weak),
        "supervised_samples": len(supervised),
        "models": trained,
    })
    return out


def stage_eval(
    cfg: PipelineConfig,
    out_root: Path,
    model_path: Path | None = None,
    workers: int = 1,
) -> Path:
    out_root = Path(out_root)
    out = out_root / "eval"
    if model_path is None:
        model_path = _expect(out_root / "train" / "model.json", "train")
    deploy_dir = _expect(out_root / "deploy" / "manifest.json", "deploy-set").parent
    manifest = DatasetManifest.load(deploy_dir / "manifest.json")
    model = ProbeModel.load(model_path)
    crop = _crop_bitmap(cfg)
    batch = manifest_features(manifest, deploy_dir, crop, workers)
    scores = predict_batch(model, batch.features)
    threshold = float(cfg.doc["study"]["threshold"])
    report = evaluate(scores, batch.labels.astype(int), threshold,
                      dataset_hash=manifest.config_hash)
    report.save(out / "report.json")
    _write_report(out, "eval", cfg, {"metrics": report.metrics,
                                     "samples": len(manifest.samples)})
    return out


# ---------------------------------------------------------------------------
# verification

def verify_run(out_root: Path) -> tuple[bool, list[dict]]:
    """Check that every artifact in a run directory embeds the same config hash."""
    out_root = Path(out_root)
    findings = []
    hashes = set()
    for report_path in sorted(out_root.glob("*/report.json")):
        doc = json.loads(report_path.read_text())
        found = doc.get("config_hash", "")
        hashes.add(found)
        findings.append({"file": str(report_path.relative_to(out_root)),
                         "config_hash": found})
    for manifest_path in sorted(out_root.glob("**/manifest.json")):
        doc = json.loads(manifest_path.read_text())
        found = doc.get("config_hash", "")
        if found:
            hashes.add(found)
            findings.append({"file": str(manifest_path.relative_to(out_root)),
                             "config_hash": found})
    ok = len(hashes) <= 1
    return ok, findings
