"""Deterministic synthetic try-on scene: five people, five garments.

Everything is drawn from fixed integer geometry, so repeated builds produce
byte-identical files. The scene exercises the interesting layout cases:
paired targets, short-to-long sleeves (nothing to generate), long-to-short
sleeves (sleeve skin must be generated), and a laterally shifted garment.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imaging import (
    LABEL_ARMS,
    LABEL_BOTTOM,
    LABEL_HEAD,
    LABEL_TORSO_CLOTHES,
    BinaryMask,
    LabelMap,
    Raster,
    label_mask,
)
from .score import PoseKeypoints

CANVAS_HEIGHT = 192
CANVAS_WIDTH = 144

_HEAD = (slice(12, 42), slice(57, 87))
_TORSO = (slice(42, 117), slice(42, 102))
_SLEEVES = ((slice(42, 105), slice(24, 42)), (slice(42, 105), slice(102, 120)))
_FOREARMS = ((slice(105, 117), slice(24, 42)), (slice(105, 117), slice(102, 120)))
_BOTTOM = (slice(117, 177), slice(45, 99))
_PRODUCT_RECT = (slice(36, 136), slice(36, 108))

_SKIN = (208, 172, 146)
_BOTTOM_RGB = (52, 56, 92)


def person_parse(long_sleeve: bool) -> LabelMap:
    """Synthetic person parse; sleeves are clothes or bare arms."""
    labels = np.zeros((CANVAS_HEIGHT, CANVAS_WIDTH), dtype=np.uint8)
    labels[_HEAD] = LABEL_HEAD
    labels[_TORSO] = LABEL_TORSO_CLOTHES
    sleeve_label = LABEL_TORSO_CLOTHES if long_sleeve else LABEL_ARMS
    for region in _SLEEVES:
        labels[region] = sleeve_label
    for region in _FOREARMS:
        labels[region] = LABEL_ARMS
    labels[_BOTTOM] = LABEL_BOTTOM
    return LabelMap(labels)


def person_image(parse: LabelMap, clothes_rgb) -> Raster:
    """Render a parse: graded background, skin, garment and bottom fills."""
    h, w = parse.height, parse.width
    rows = np.arange(h)[:, None, None]
    data = np.empty((h, w, 3), dtype=np.int64)
    for ch, top in enumerate((230, 230, 236)):
        data[:, :, ch] = top - rows[:, :, 0] * 24 // (h - 1)

    labels = parse.labels
    for label, rgb in (
        (LABEL_HEAD, _SKIN),
        (LABEL_ARMS, _SKIN),
        (LABEL_BOTTOM, _BOTTOM_RGB),
    ):
        data[labels == label] = rgb

    # Garment pixels get a horizontal shade ramp so warps are visible.
    cols = np.arange(w)[None, :]
    ramp = cols * 36 // (w - 1)
    garment = labels == LABEL_TORSO_CLOTHES
    for ch in range(3):
        channel = data[:, :, ch]
        shade = np.clip(clothes_rgb[ch] + ramp - 18, 0, 255)
        channel[garment] = np.broadcast_to(shade, (h, w))[garment]
    return Raster(np.clip(data, 0, 255).astype(np.uint8))


def clothes_product(stripe_a, stripe_b) -> tuple[Raster, BinaryMask]:
    """Standalone garment photo: striped rectangle on a white background."""
    data = np.full((CANVAS_HEIGHT, CANVAS_WIDTH, 3), 255, dtype=np.uint8)
    bits = np.zeros((CANVAS_HEIGHT, CANVAS_WIDTH), dtype=np.uint8)
    bits[_PRODUCT_RECT] = 1
    rows = np.arange(CANVAS_HEIGHT)
    banded = (rows // 8) % 2 == 0
    for ch in range(3):
        channel = np.where(banded, stripe_a[ch], stripe_b[ch])
        data[:, :, ch] = np.where(bits == 1, channel[:, None], data[:, :, ch])
    return Raster(data), BinaryMask(bits)


def _pose(shoulders, elbows, wrists, hips) -> PoseKeypoints:
    """Assemble a full 18-point pose around the scoring limbs."""
    (rs, ls), (re, le), (rw, lw), (rh, lh) = shoulders, elbows, wrists, hips
    points = np.array(
        [
            (72, 22),  # nose
            (72, 44),  # neck
            rs, re, rw,
            ls, le, lw,
            rh, (62, 150), (62, 186),
            lh, (82, 150), (82, 186),
            (66, 18), (78, 18),  # eyes
            (60, 20), (84, 20),  # ears
        ],
        dtype=np.float64,
    )
    return PoseKeypoints(points, np.ones(18, dtype=bool))


def pose_spread() -> PoseKeypoints:
    """Arms stretched wide and low: high complexity."""
    return _pose(
        shoulders=((24, 30), (120, 30)),
        elbows=((6, 90), (138, 90)),
        wrists=((2, 180), (142, 180)),
        hips=((60, 110), (84, 110)),
    )


def pose_relaxed() -> PoseKeypoints:
    """Arms moderately out: mid complexity."""
    return _pose(
        shoulders=((40, 58), (104, 58)),
        elbows=((14, 98), (130, 98)),
        wrists=((10, 150), (134, 150)),
        hips=((60, 115), (84, 115)),
    )


def pose_tucked() -> PoseKeypoints:
    """Arms close to the body: low complexity."""
    return _pose(
        shoulders=((52, 70), (92, 70)),
        elbows=((48, 100), (96, 100)),
        wrists=((50, 130), (94, 130)),
        hips=((60, 108), (84, 108)),
    )


def _torso_mask() -> np.ndarray:
    bits = np.zeros((CANVAS_HEIGHT, CANVAS_WIDTH), dtype=np.uint8)
    bits[_TORSO] = 1
    return bits


def _scene_entries():
    """(id, parse, synth_body, synth_clothes, pose, garment color, stripes)."""
    entries = []

    # Paired target, short sleeves: nothing to generate.
    parse = person_parse(long_sleeve=False)
    entries.append(
        (
            "pair-a",
            parse,
            parse,
            label_mask(parse, {LABEL_TORSO_CLOTHES}),
            pose_spread(),
            (188, 52, 48),
            ((188, 52, 48), (236, 120, 110)),
        )
    )

    # Short to long sleeves: the new garment covers the bare arms, and no
    # old-clothes pixel turns into skin, so the generation region is empty.
    parse = person_parse(long_sleeve=False)
    body = parse.labels.copy()
    clothes_bits = _torso_mask()
    for region in _SLEEVES:
        body[region] = LABEL_TORSO_CLOTHES
        clothes_bits[region] = 1
    entries.append(
        (
            "to-long",
            parse,
            LabelMap(body),
            BinaryMask(clothes_bits),
            pose_relaxed(),
            (44, 140, 72),
            ((44, 140, 72), (108, 200, 140)),
        )
    )

    # Long to short sleeves: old sleeve pixels become arm skin to generate.
    parse = person_parse(long_sleeve=True)
    body = parse.labels.copy()
    for region in _SLEEVES:
        body[region] = LABEL_ARMS
    entries.append(
        (
            "to-short",
            parse,
            LabelMap(body),
            BinaryMask(_torso_mask()),
            pose_tucked(),
            (42, 84, 168),
            ((42, 84, 168), (120, 160, 224)),
        )
    )

    # Garment shifted sideways: a sliver of the old torso is uncovered and
    # must be generated as arm skin.
    parse = person_parse(long_sleeve=False)
    body = parse.labels.copy()
    body[_TORSO[0], slice(42, 51)] = LABEL_ARMS
    shifted = np.zeros((CANVAS_HEIGHT, CANVAS_WIDTH), dtype=np.uint8)
    shifted[_TORSO[0], slice(51, 111)] = 1
    entries.append(
        (
            "shifted",
            parse,
            LabelMap(body),
            BinaryMask(shifted),
            pose_relaxed(),
            (214, 128, 38),
            ((214, 128, 38), (244, 186, 120)),
        )
    )

    # Paired target, long sleeves.
    parse = person_parse(long_sleeve=True)
    entries.append(
        (
            "pair-b",
            parse,
            parse,
            label_mask(parse, {LABEL_TORSO_CLOTHES}),
            pose_spread(),
            (122, 62, 150),
            ((122, 62, 150), (180, 130, 204)),
        )
    )
    return entries


DEMO_CONFIG = {
    "resolution": [CANVAS_HEIGHT, CANVAS_WIDTH],
    "grid_k": 5,
    "constraint": {"lambda_r": 0.1, "lambda_s": 0.1, "delta": 0.0},
    "fit": {"iterations": 150, "learning_rate": 0.01},
    "l4_threshold": 0.08,
    "parallel": 1,
}


def build_demo_scene(out_dir) -> Path:
    """Write the scene under out_dir; returns the manifest path."""
    root = Path(out_dir)
    for sub in ("images", "parses", "poses", "clothes", "synth"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    lines = []
    for entry_id, parse, synth_body, synth_clothes, pose, rgb, stripes in _scene_entries():
        person_image(parse, rgb).save(root / "images" / f"{entry_id}.png")
        parse.save(root / "parses" / f"{entry_id}.png")
        (root / "poses" / f"{entry_id}.json").write_text(pose.to_json() + "\n")
        product, product_mask = clothes_product(*stripes)
        product.save(root / "clothes" / f"{entry_id}.png")
        product_mask.save(root / "clothes" / f"{entry_id}_mask.png")
        synth_body.save(root / "synth" / f"{entry_id}_body.png")
        synth_clothes.save(root / "synth" / f"{entry_id}_clothes.png")
        lines.append(
            json.dumps(
                {
                    "id": entry_id,
                    "reference": f"images/{entry_id}.png",
                    "parse": f"parses/{entry_id}.png",
                    "pose": f"poses/{entry_id}.json",
                    "clothes": f"clothes/{entry_id}.png",
                    "clothes_mask": f"clothes/{entry_id}_mask.png",
                    "synth_body": f"synth/{entry_id}_body.png",
                    "synth_clothes": f"synth/{entry_id}_clothes.png",
                },
                sort_keys=True,
            )
        )

    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    (root / "config.json").write_text(json.dumps(DEMO_CONFIG, indent=2, sort_keys=True) + "\n")
    return manifest
