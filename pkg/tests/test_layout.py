import numpy as np
import pytest

from tryongeo.imaging import (
    LABEL_ARMS,
    LABEL_BACKGROUND,
    LABEL_FUSED,
    LABEL_TORSO_CLOTHES,
    AlphaMap,
    BinaryMask,
    LabelMap,
    Raster,
    label_mask,
)
from tryongeo.layout import (
    CompositeLayout,
    LayoutBundle,
    alpha_composite,
    build_fused_map,
    compose_layout,
    composite_body_mask,
    generation_region,
    occlude_arms,
    oracle_bundle,
    preserved_image,
    strip_clothes,
)

from oracles import naive_composite_body, naive_mask_union_intersect, naive_masked_zero


def random_parse(rng, h=8, w=8):
    return LabelMap(rng.integers(0, 6, (h, w), dtype=np.uint8))


def random_mask(rng, h=8, w=8):
    return BinaryMask(rng.integers(0, 2, (h, w), dtype=np.uint8))


def random_raster(rng, h=8, w=8):
    return Raster(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


class TestFusedMap:
    def test_untouched_without_arm_or_torso_pixels(self):
        lm = LabelMap(np.array([[0, 1], [4, 5]], dtype=np.uint8))
        assert np.array_equal(build_fused_map(lm).labels, lm.labels)

    def test_all_arms_becomes_all_fused(self):
        lm = LabelMap(np.full((3, 3), LABEL_ARMS, dtype=np.uint8))
        assert (build_fused_map(lm).labels == LABEL_FUSED).all()

    def test_mixed_parse_matches_enumeration(self):
        lm = LabelMap(
            np.array(
                [
                    [0, 2, 3, 1],
                    [2, 5, 0, 4],
                    [3, 3, 2, 2],
                    [4, 0, 1, 3],
                ],
                dtype=np.uint8,
            )
        )
        got = build_fused_map(lm)
        for r in range(4):
            for c in range(4):
                v = lm.labels[r, c]
                expect = LABEL_FUSED if v in (LABEL_ARMS, LABEL_TORSO_CLOTHES) else v
                assert got.labels[r, c] == expect


class TestGenerationRegion:
    def test_no_arms_in_target_layout(self):
        synth = LabelMap(np.full((4, 4), LABEL_BACKGROUND, dtype=np.uint8))
        clothes = BinaryMask(np.ones((4, 4), dtype=np.uint8))
        assert generation_region(synth, clothes).bits.sum() == 0

    def test_no_clothes(self):
        rng = np.random.default_rng(181)
        synth = random_parse(rng, 4, 4)
        clothes = BinaryMask(np.zeros((4, 4), dtype=np.uint8))
        assert generation_region(synth, clothes).bits.sum() == 0

    def test_matches_enumeration(self):
        rng = np.random.default_rng(191)
        synth = random_parse(rng, 4, 4)
        clothes = random_mask(rng, 4, 4)
        got = generation_region(synth, clothes)
        arms = (synth.labels == LABEL_ARMS).astype(np.uint8)
        expect = naive_mask_union_intersect(arms, clothes.bits, "and")
        assert np.array_equal(got.bits, expect)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(193)
        with pytest.raises(ValueError):
            generation_region(random_parse(rng, 4, 4), random_mask(rng, 4, 5))

    def test_contained_in_both_operands(self):
        rng = np.random.default_rng(197)
        for _ in range(20):
            synth = random_parse(rng)
            clothes = random_mask(rng)
            gen = generation_region(synth, clothes)
            arms = label_mask(synth, {LABEL_ARMS})
            assert not (gen.bits & ~arms.bits.astype(bool)).any()
            assert not (gen.bits & ~clothes.bits.astype(bool)).any()


class TestCompositeBodyMask:
    def _disjoint_pair(self, rng, h=8, w=8):
        gen = random_mask(rng, h, w)
        body = BinaryMask(random_mask(rng, h, w).bits & (1 - gen.bits))
        return gen, body

    def test_full_synth_clothes_blanks_everything(self):
        rng = np.random.default_rng(199)
        gen, body = self._disjoint_pair(rng)
        ones = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        assert composite_body_mask(gen, body, ones).bits.sum() == 0

    def test_empty_synth_clothes_gives_union(self):
        rng = np.random.default_rng(211)
        gen, body = self._disjoint_pair(rng)
        zeros = BinaryMask(np.zeros((8, 8), dtype=np.uint8))
        got = composite_body_mask(gen, body, zeros)
        assert np.array_equal(got.bits, gen.bits | body.bits)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(223)
        for _ in range(30):
            gen, body = self._disjoint_pair(rng)
            synth = random_mask(rng)
            got = composite_body_mask(gen, body, synth)
            expect = naive_composite_body(gen.bits, body.bits, synth.bits)
            assert np.array_equal(got.bits, expect)

    def test_disjoint_from_synth_clothes(self):
        rng = np.random.default_rng(227)
        for _ in range(30):
            gen, body = self._disjoint_pair(rng)
            synth = random_mask(rng)
            got = composite_body_mask(gen, body, synth)
            assert not (got.bits & synth.bits).any()

    def test_overlapping_inputs_raise(self):
        ones = BinaryMask(np.ones((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            composite_body_mask(ones, ones, ones)


class TestPreservedImage:
    def test_empty_mask_is_identity(self):
        rng = np.random.default_rng(229)
        img = random_raster(rng)
        zeros = BinaryMask(np.zeros((8, 8), dtype=np.uint8))
        assert np.array_equal(preserved_image(img, zeros).data, img.data)

    def test_full_mask_is_black(self):
        rng = np.random.default_rng(233)
        img = random_raster(rng)
        ones = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        assert preserved_image(img, ones).data.sum() == 0

    def test_matches_enumeration(self):
        rng = np.random.default_rng(239)
        img = random_raster(rng, 4, 4)
        m = random_mask(rng, 4, 4)
        got = preserved_image(img, m)
        expect = naive_masked_zero(img.data, m.bits, keep_where_zero=True)
        assert np.array_equal(got.data, expect)

    def test_pixels_outside_mask_bit_exact(self):
        rng = np.random.default_rng(241)
        img = random_raster(rng)
        m = random_mask(rng)
        got = preserved_image(img, m)
        outside = m.bits == 0
        assert np.array_equal(got.data[outside], img.data[outside])


class TestOccludeArms:
    def test_empty_irregular_mask(self):
        rng = np.random.default_rng(251)
        img = random_raster(rng)
        arms = random_mask(rng)
        zeros = BinaryMask(np.zeros((8, 8), dtype=np.uint8))
        assert np.array_equal(occlude_arms(img, arms, zeros).data, img.data)

    def test_full_irregular_mask_removes_arms_only(self):
        rng = np.random.default_rng(257)
        img = random_raster(rng)
        arms = random_mask(rng)
        ones = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        got = occlude_arms(img, arms, ones)
        assert (got.data[arms.as_bool()] == 0).all()
        keep = ~arms.as_bool()
        assert np.array_equal(got.data[keep], img.data[keep])

    def test_matches_enumeration(self):
        rng = np.random.default_rng(263)
        img = random_raster(rng, 5, 5)
        arms = random_mask(rng, 5, 5)
        irregular = random_mask(rng, 5, 5)
        got = occlude_arms(img, arms, irregular)
        removed = naive_mask_union_intersect(irregular.bits, arms.bits, "and")
        expect = naive_masked_zero(img.data, removed, keep_where_zero=True)
        assert np.array_equal(got.data, expect)


class TestAlphaComposite:
    def test_alpha_zero_keeps_warped(self):
        rng = np.random.default_rng(269)
        warped = random_raster(rng)
        refined = random_raster(rng)
        zeros = AlphaMap(np.zeros((8, 8)))
        assert np.array_equal(alpha_composite(warped, refined, zeros).data, warped.data)

    def test_alpha_one_takes_refined(self):
        rng = np.random.default_rng(271)
        warped = random_raster(rng)
        refined = random_raster(rng)
        ones = AlphaMap(np.ones((8, 8)))
        assert np.array_equal(alpha_composite(warped, refined, ones).data, refined.data)

    def test_half_blend_of_constants(self):
        # 0.2 and 0.8 in float view are exactly 51 and 204; the blend is
        # 127.5 which rounds to 128.
        warped = Raster(np.full((4, 4, 3), 51, np.uint8))
        refined = Raster(np.full((4, 4, 3), 204, np.uint8))
        out = alpha_composite(warped, refined, AlphaMap(np.full((4, 4), 0.5)))
        assert (out.data == 128).all()

    def test_convex_combination_bounds(self):
        rng = np.random.default_rng(277)
        for _ in range(20):
            warped = random_raster(rng)
            refined = random_raster(rng)
            alpha = AlphaMap(rng.uniform(0, 1, (8, 8)))
            out = alpha_composite(warped, refined, alpha)
            lo = np.minimum(warped.data, refined.data)
            hi = np.maximum(warped.data, refined.data)
            assert (out.data >= lo).all() and (out.data <= hi).all()

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(281)
        with pytest.raises(ValueError):
            alpha_composite(random_raster(rng), random_raster(rng), AlphaMap(np.zeros((8, 9))))


def build_bundle(rng, h=8, w=8):
    parse = random_parse(rng, h, w)
    synth_body = random_parse(rng, h, w)
    synth_clothes = random_mask(rng, h, w)
    clothes = label_mask(parse, {LABEL_TORSO_CLOTHES})
    return LayoutBundle(parse, synth_body, synth_clothes, clothes)


class TestComposeLayout:
    def test_bundle_requires_matching_clothes_mask(self):
        rng = np.random.default_rng(283)
        parse = random_parse(rng)
        wrong = BinaryMask(np.ones((8, 8), dtype=np.uint8))
        with pytest.raises(ValueError):
            LayoutBundle(parse, parse, wrong, wrong)

    def test_composite_masks_are_disjoint(self):
        rng = np.random.default_rng(293)
        for _ in range(25):
            comp = compose_layout(build_bundle(rng))
            assert not (comp.preserve.bits & comp.generate.bits).any()
            assert not (comp.preserve.bits & comp.clothes.bits).any()
            assert not (comp.generate.bits & comp.clothes.bits).any()
            assert not (comp.composited_body.bits & comp.clothes.bits).any()

    def test_generate_lives_inside_old_clothes(self):
        rng = np.random.default_rng(307)
        for _ in range(25):
            bundle = build_bundle(rng)
            comp = compose_layout(bundle)
            assert not (comp.generate.bits & ~bundle.clothes.bits.astype(bool)).any()

    def test_oracle_bundle_generates_nothing(self):
        rng = np.random.default_rng(311)
        parse = random_parse(rng)
        comp = compose_layout(oracle_bundle(parse))
        assert comp.generate.bits.sum() == 0
        assert np.array_equal(comp.clothes.bits, label_mask(parse, {LABEL_TORSO_CLOTHES}).bits)
        assert np.array_equal(comp.preserve.bits, 1 - comp.clothes.bits)

    def test_layout_validation_rejects_overlap(self):
        ones = BinaryMask(np.ones((4, 4), dtype=np.uint8))
        zeros = BinaryMask(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            CompositeLayout(preserve=ones, generate=ones, clothes=zeros, composited_body=zeros)


class TestStripClothes:
    def test_zeroes_exactly_the_clothes_region(self):
        rng = np.random.default_rng(313)
        img = random_raster(rng)
        clothes = random_mask(rng)
        got = strip_clothes(img, clothes)
        assert (got.data[clothes.as_bool()] == 0).all()
        keep = ~clothes.as_bool()
        assert np.array_equal(got.data[keep], img.data[keep])
