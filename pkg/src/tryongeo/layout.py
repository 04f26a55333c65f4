"""Semantic-layout mask algebra for try-on composition.

Works out, from the reference parse and a synthesized target layout, which
pixels to preserve untouched, which to cover with the new clothes, and
which previously-covered body pixels must be generated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import (
    BODY_PART_LABELS,
    LABEL_ARMS,
    LABEL_FUSED,
    LABEL_TORSO_CLOTHES,
    AlphaMap,
    BinaryMask,
    LabelMap,
    Raster,
    _check_same_shape,
    label_mask,
    mask_apply,
)
from .score import PoseKeypoints


@dataclass(frozen=True)
class LayoutBundle:
    """Per-entry layout inputs.

    clothes must equal the torso-clothes mask of parse; synth_body and
    synth_clothes describe the target layout (in oracle mode they are
    derived from parse itself).
    """

    parse: LabelMap
    synth_body: LabelMap
    synth_clothes: BinaryMask
    clothes: BinaryMask
    pose: PoseKeypoints | None = None

    def __post_init__(self):
        for name, other in (
            ("synth_body", self.synth_body),
            ("synth_clothes", self.synth_clothes),
            ("clothes", self.clothes),
        ):
            _check_same_shape(self.parse, other, f"layout bundle {name}")
        expected = label_mask(self.parse, {LABEL_TORSO_CLOTHES})
        if not np.array_equal(self.clothes.bits, expected.bits):
            raise ValueError("clothes mask must equal the parse torso-clothes region")


@dataclass(frozen=True)
class CompositeLayout:
    """Composed per-pixel plan: preserve / generate / clothes are disjoint.

    generate already excludes pixels claimed by the new clothes; pixels of
    the old clothes region claimed by nobody stay dark, as the masked
    reference dictates.
    """

    preserve: BinaryMask
    generate: BinaryMask
    clothes: BinaryMask
    composited_body: BinaryMask

    def __post_init__(self):
        for name, other in (
            ("generate", self.generate),
            ("clothes", self.clothes),
            ("composited_body", self.composited_body),
        ):
            _check_same_shape(self.preserve, other, f"composite layout {name}")
        masks = {
            "preserve": self.preserve.bits,
            "generate": self.generate.bits,
            "clothes": self.clothes.bits,
        }
        names = list(masks)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if (masks[a] & masks[b]).any():
                    raise ValueError(f"composite layout: {a} and {b} overlap")
        if (self.composited_body.bits & self.clothes.bits).any():
            raise ValueError("composite layout: composited body overlaps clothes")


def build_fused_map(parse: LabelMap) -> LabelMap:
    """Relabel arms and torso-clothes to the fused label, hiding the old shape."""
    labels = parse.labels.copy()
    labels[np.isin(labels, (LABEL_ARMS, LABEL_TORSO_CLOTHES))] = LABEL_FUSED
    return LabelMap(labels)


def generation_region(synth_body: LabelMap, clothes: BinaryMask) -> BinaryMask:
    """Pixels that were clothes but are arms under the target layout."""
    _check_same_shape(synth_body, clothes, "generation_region")
    arms = label_mask(synth_body, {LABEL_ARMS})
    return BinaryMask(arms.bits & clothes.bits)


def composite_body_mask(
    gen: BinaryMask, body: BinaryMask, synth_clothes: BinaryMask
) -> BinaryMask:
    """(gen union body) minus the new clothes region.

    gen and body must be disjoint: gen lives inside the old clothes region
    and body outside it, so an overlap means the layout inputs are broken.
    """
    _check_same_shape(gen, body, "composite_body_mask")
    _check_same_shape(gen, synth_clothes, "composite_body_mask")
    if (gen.bits & body.bits).any():
        raise ValueError("composite_body_mask: generation and body masks overlap")
    return BinaryMask((gen.bits | body.bits) & (1 - synth_clothes.bits))


def strip_clothes(reference: Raster, clothes: BinaryMask) -> Raster:
    """Reference image with the original clothes region zeroed."""
    _check_same_shape(reference, clothes, "strip_clothes")
    return mask_apply(reference, BinaryMask(1 - clothes.bits))


def preserved_image(reference_minus_clothes: Raster, synth_clothes: BinaryMask) -> Raster:
    """Zero the new clothes region too; what's left passes through untouched."""
    _check_same_shape(reference_minus_clothes, synth_clothes, "preserved_image")
    return mask_apply(reference_minus_clothes, BinaryMask(1 - synth_clothes.bits))


def occlude_arms(
    reference_minus_clothes: Raster, arms: BinaryMask, irregular: BinaryMask
) -> Raster:
    """Remove the arm pixels covered by an irregular mask (training-style input)."""
    _check_same_shape(reference_minus_clothes, arms, "occlude_arms")
    _check_same_shape(reference_minus_clothes, irregular, "occlude_arms")
    keep = 1 - (irregular.bits & arms.bits)
    return mask_apply(reference_minus_clothes, BinaryMask(keep))


def alpha_composite(warped: Raster, refined: Raster, alpha: AlphaMap) -> Raster:
    """Blend per pixel: (1 - alpha) * warped + alpha * refined."""
    _check_same_shape(warped, refined, "alpha_composite")
    _check_same_shape(warped, alpha, "alpha_composite")
    a = alpha.alpha[:, :, None]
    return Raster.from_float((1.0 - a) * warped.to_float() + a * refined.to_float())


def compose_layout(bundle: LayoutBundle) -> CompositeLayout:
    """Derive the composite plan from a layout bundle.

    preserve covers everything outside both clothes regions, so preserved
    pixels survive the whole pipeline byte-for-byte.
    """
    gen_raw = generation_region(bundle.synth_body, bundle.clothes)
    body = label_mask(bundle.parse, BODY_PART_LABELS)
    composited = composite_body_mask(gen_raw, body, bundle.synth_clothes)
    generate = BinaryMask(gen_raw.bits & (1 - bundle.synth_clothes.bits))
    preserve = BinaryMask(1 - (bundle.clothes.bits | bundle.synth_clothes.bits))
    return CompositeLayout(
        preserve=preserve,
        generate=generate,
        clothes=bundle.synth_clothes,
        composited_body=composited,
    )


def oracle_bundle(parse: LabelMap, pose: PoseKeypoints | None = None) -> LayoutBundle:
    """Bundle whose target layout is the reference parse itself (paired mode)."""
    clothes = label_mask(parse, {LABEL_TORSO_CLOTHES})
    return LayoutBundle(
        parse=parse,
        synth_body=parse,
        synth_clothes=clothes,
        clothes=clothes,
        pose=pose,
    )
