import numpy as np
import pytest

from reoscore import (
    AttentionConfig,
    CovKind,
    FeatureTensor,
    GroundTruthSet,
    Mode,
    ScoringConfig,
    UsageError,
    context_features,
    cosine,
    error_vectors,
    extraness,
    omission,
    orthogonal_residual,
    relevance,
    score_instance,
)
from reoscore.attention import ContextFeatures
from reoscore.metrics import CombineOrder, RelevanceSim
from reoscore.tensor import estimate_covariance

from oracles import (
    extraness_oracle,
    omission_oracle,
    pair_scores_oracle,
    residual_oracle,
    score_instance_oracle,
    spearman_oracle,
)


def identity_cov(dim):
    return estimate_covariance(np.zeros((1, dim)), CovKind.IDENTITY)


def ctx(rows):
    return ContextFeatures(tensor=FeatureTensor(rows))


class TestOrthogonalResidual:
    def test_axis_aligned(self):
        np.testing.assert_allclose(orthogonal_residual((1, 1), (1, 0)), [0.0, 1.0])

    def test_parallel_gives_zero(self):
        np.testing.assert_allclose(orthogonal_residual((2, 0), (1, 0)), [0.0, 0.0])

    def test_orthogonal_component_preserved(self):
        np.testing.assert_allclose(orthogonal_residual((3, 4), (0, 5)), [3.0, 0.0])

    def test_zero_base_returns_input(self):
        np.testing.assert_allclose(orthogonal_residual((3, 4), (0, 0)), [3.0, 4.0])

    def test_dimension_mismatch(self):
        with pytest.raises(UsageError):
            orthogonal_residual((1, 2), (1, 2, 3))

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(51)
        for _ in range(500):
            d = int(rng.integers(1, 32))
            x = rng.normal(size=d)
            base = rng.normal(size=d)
            if np.linalg.norm(base) == 0:
                continue
            r = orthogonal_residual(x, base)
            assert abs(float(r @ base)) <= 1e-5 * np.linalg.norm(x) * np.linalg.norm(base) + 1e-12

    def test_pythagoras(self):
        rng = np.random.default_rng(53)
        for _ in range(500):
            d = int(rng.integers(1, 32))
            x = rng.normal(size=d)
            base = rng.normal(size=d)
            r = orthogonal_residual(x, base)
            lhs = float(x @ x)
            rhs = float((x - r) @ (x - r)) + float(r @ r)
            assert rhs == pytest.approx(lhs, rel=1e-5, abs=1e-12)

    def test_base_scale_invariance(self):
        rng = np.random.default_rng(59)
        for _ in range(300):
            d = int(rng.integers(1, 16))
            x = rng.normal(size=d)
            base = rng.normal(size=d)
            if np.linalg.norm(base) == 0:
                continue
            c = float(rng.choice([-1, 1]) * rng.uniform(0.01, 100))
            np.testing.assert_allclose(
                orthogonal_residual(x, c * base), orthogonal_residual(x, base), atol=1e-6
            )

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(61)
        for _ in range(200):
            d = int(rng.integers(1, 10))
            x = rng.normal(size=d)
            base = rng.normal(size=d)
            np.testing.assert_allclose(orthogonal_residual(x, base), residual_oracle(x, base), atol=1e-9)


class TestRelevance:
    def test_perfect_match(self):
        rows = np.array([[1.0, 2.0], [3.0, -1.0]])
        assert relevance(ctx(rows), rows) == pytest.approx(1.0, abs=1e-6)

    def test_all_orthogonal(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0]])
        g = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert relevance(ctx(a), g) == pytest.approx(0.0, abs=1e-7)

    def test_mean_of_cosines(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0]])
        g = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert relevance(ctx(a), g) == pytest.approx(0.5, abs=1e-7)

    def test_shape_mismatch(self):
        with pytest.raises(UsageError, match="mismatch"):
            relevance(ctx(np.ones((2, 2))), np.ones((3, 2)))

    def test_clipped_variant_normalizes_over_regions(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0]])
        g = np.array([[1.0, 0.0], [1.0, 0.0]])
        # both cosines 1 -> each normalized to 1/sqrt(2); mean = 1/sqrt(2)
        assert relevance(ctx(a), g, RelevanceSim.CLIPPED) == pytest.approx(1 / np.sqrt(2), abs=1e-6)

    def test_clipped_variant_zero_when_all_negative(self):
        a = np.array([[1.0, 0.0]])
        g = np.array([[-1.0, 0.0]])
        assert relevance(ctx(a), g, RelevanceSim.CLIPPED) == 0.0


class TestExtranessOmission:
    def test_fully_extra_scores_zero(self):
        a = np.array([[0.0, 1.0], [0.0, 2.0]])
        g = np.array([[1.0, 0.0], [2.0, 0.0]])
        assert extraness(ctx(a), g, identity_cov(2)) == pytest.approx(0.0, abs=1e-9)

    def test_fully_aligned_unit_scores_one(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0]])
        g = np.array([[2.0, 0.0], [0.0, 3.0]])
        assert extraness(ctx(a), g, identity_cov(2)) == pytest.approx(1.0, abs=1e-9)

    def test_extraness_hand_example(self):
        a = np.array([[1.0, 1.0]])
        g = np.array([[1.0, 0.0]])
        assert extraness(ctx(a), g, identity_cov(2)) == pytest.approx(1.0, abs=1e-9)

    def test_omission_mirror_example(self):
        g = np.array([[1.0, 1.0]])
        a = np.array([[1.0, 0.0]])
        assert omission(ctx(a), g, identity_cov(2)) == pytest.approx(1.0, abs=1e-9)

    def test_all_ground_truth_missing_scores_zero(self):
        a = np.array([[1.0, 0.0]])
        g = np.array([[0.0, 1.0]])
        assert omission(ctx(a), g, identity_cov(2)) == pytest.approx(0.0, abs=1e-9)

    def test_duality_is_exact(self):
        rng = np.random.default_rng(67)
        for _ in range(100):
            n, d = int(rng.integers(1, 5)), int(rng.integers(1, 9))
            a = rng.normal(size=(n, d)).astype(np.float32)
            g = rng.normal(size=(n, d)).astype(np.float32)
            s = estimate_covariance(np.vstack([a, g]), CovKind.DIAGONAL, ridge=0.01)
            assert omission(ctx(a), g, s) == extraness(ctx(g), a, s)

    def test_identity_covariance_closed_form(self):
        rng = np.random.default_rng(71)
        for _ in range(500):
            d = int(rng.integers(1, 16))
            a = rng.normal(size=(1, d))
            g = rng.normal(size=(1, d))
            if np.linalg.norm(g) == 0:
                continue
            want = abs(cosine(a[0], g[0])) * np.linalg.norm(a[0])
            got = extraness(ctx(a), g, identity_cov(d))
            assert got == pytest.approx(want, abs=1e-6)

    def test_bounds_under_identity(self):
        rng = np.random.default_rng(73)
        for _ in range(100):
            n, d = int(rng.integers(1, 6)), int(rng.integers(1, 8))
            a = ctx(rng.normal(size=(n, d)))
            g = rng.normal(size=(n, d)).astype(np.float32)
            s = identity_cov(d)
            e = extraness(a, g, s)
            o = omission(a, g, s)
            assert 0.0 <= e <= np.linalg.norm(a.data.astype(np.float64), axis=1).mean() + 1e-9
            assert 0.0 <= o <= np.linalg.norm(g.astype(np.float64), axis=1).mean() + 1e-9

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(79)
        for kind in (CovKind.IDENTITY, CovKind.DIAGONAL, CovKind.SHRINKAGE_FULL):
            for _ in range(30):
                n, d = int(rng.integers(1, 5)), int(rng.integers(2, 8))
                a = rng.normal(size=(n, d)).astype(np.float32)
                g = rng.normal(size=(n, d)).astype(np.float32)
                ridge = float(rng.uniform(1e-3, 0.3))
                if kind is CovKind.IDENTITY:
                    s = identity_cov(d)
                    dense_kind, dense_ridge = "identity", 0.0
                else:
                    s = estimate_covariance(np.vstack([a, g]), kind, ridge=ridge)
                    dense_kind, dense_ridge = kind.value, ridge
                from oracles import covariance_matrix_oracle

                dense = covariance_matrix_oracle(np.vstack([a, g]).tolist(), dense_kind, ridge=dense_ridge)
                assert extraness(ctx(a), g, s) == pytest.approx(extraness_oracle(a, g, dense), abs=1e-6)
                assert omission(ctx(a), g, s) == pytest.approx(omission_oracle(a, g, dense), abs=1e-6)


class TestErrorVectors:
    def test_identical_inputs_give_zero_errors(self):
        rows = np.array([[1.0, 2.0], [0.5, -1.0]])
        ev = error_vectors(ctx(rows), rows)
        np.testing.assert_allclose(ev.extra.data, 0.0, atol=1e-7)
        np.testing.assert_allclose(ev.missing.data, 0.0, atol=1e-7)

    def test_hand_example_one_sided(self):
        ev = error_vectors(ctx(np.array([[1.0, 1.0]])), np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(ev.extra.data, [[0.0, 1.0]], atol=1e-7)
        # residual of (1,0) projected off (1,1)
        np.testing.assert_allclose(ev.missing.data, [[0.5, -0.5]], atol=1e-7)

    def test_hand_example_both_sides(self):
        ev = error_vectors(ctx(np.array([[1.0, 0.0]])), np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(ev.extra.data, [[0.5, -0.5]], atol=1e-7)
        np.testing.assert_allclose(ev.missing.data, [[0.0, 1.0]], atol=1e-7)

    def test_rows_orthogonal_to_bases(self):
        rng = np.random.default_rng(83)
        for _ in range(50):
            n, d = int(rng.integers(1, 6)), int(rng.integers(2, 10))
            a = rng.normal(size=(n, d))
            g = rng.normal(size=(n, d))
            ev = error_vectors(ctx(a), g)
            for i in range(n):
                assert abs(float(ev.extra.data[i] @ g[i])) <= 1e-5 * np.linalg.norm(a[i]) * np.linalg.norm(g[i]) + 1e-6
                assert abs(float(ev.missing.data[i] @ a[i])) <= 1e-5 * np.linalg.norm(a[i]) * np.linalg.norm(g[i]) + 1e-6


class TestScoreInstance:
    def setup_method(self):
        rng = np.random.default_rng(89)
        self.v = FeatureTensor(rng.normal(size=(3, 6)))
        self.cand = ctx(rng.normal(size=(3, 6)))
        self.refs = tuple(ctx(rng.normal(size=(3, 6))) for _ in range(2))

    def test_reference_equal_to_candidate_scores_one(self):
        gt = GroundTruthSet(self.v, (ContextFeatures(self.cand.tensor, source="reference:0"),))
        out = score_instance(self.cand, gt, ScoringConfig(modes=(Mode.REFERENCE,)))
        assert out[Mode.REFERENCE].relevance == pytest.approx(1.0, abs=1e-6)

    def test_reference_mode_averages_axes(self):
        gt = GroundTruthSet(self.v, self.refs)
        cfg = ScoringConfig(modes=(Mode.REFERENCE,), cov_kind=CovKind.IDENTITY)
        out = score_instance(self.cand, gt, cfg)[Mode.REFERENCE]
        per_ref = [
            pair_scores_oracle(self.cand.data, ref.data, "identity") for ref in self.refs
        ]
        for axis, got in enumerate((out.relevance, out.extraness, out.omission)):
            assert got == pytest.approx(np.mean([p[axis] for p in per_ref]), abs=1e-9)

    def test_combined_is_mean_of_image_and_reference(self):
        gt = GroundTruthSet(self.v, self.refs)
        out = score_instance(self.cand, gt, ScoringConfig())
        for axis in ("relevance", "extraness", "omission"):
            want = 0.5 * (getattr(out[Mode.IMAGE], axis) + getattr(out[Mode.REFERENCE], axis))
            assert getattr(out[Mode.COMBINED], axis) == pytest.approx(want, abs=1e-12)

    def test_combine_orders_agree_for_linear_weights(self):
        gt = GroundTruthSet(self.v, self.refs)
        a = score_instance(self.cand, gt, ScoringConfig(combine_order=CombineOrder.AVERAGE_THEN_COMBINE))
        b = score_instance(self.cand, gt, ScoringConfig(combine_order=CombineOrder.COMBINE_THEN_AVERAGE))
        assert a[Mode.COMBINED].relevance == pytest.approx(b[Mode.COMBINED].relevance, abs=1e-12)
        assert a[Mode.COMBINED].omission == pytest.approx(b[Mode.COMBINED].omission, abs=1e-12)

    def test_reference_mode_without_references_rejected(self):
        gt = GroundTruthSet(self.v)
        with pytest.raises(UsageError, match="no reference"):
            score_instance(self.cand, gt, ScoringConfig(modes=(Mode.REFERENCE,)))
        with pytest.raises(UsageError, match="no reference"):
            score_instance(self.cand, gt, ScoringConfig(modes=(Mode.COMBINED,)))

    def test_image_mode_works_without_references(self):
        gt = GroundTruthSet(self.v)
        out = score_instance(self.cand, gt, ScoringConfig(modes=(Mode.IMAGE,)))
        assert set(out) == {Mode.IMAGE}

    def test_shape_mismatch_rejected(self):
        gt = GroundTruthSet(self.v)
        with pytest.raises(UsageError, match="shape"):
            score_instance(ctx(np.ones((2, 6))), gt, ScoringConfig(modes=(Mode.IMAGE,)))

    def test_declared_averaging_rule(self):
        # two references yielding relevance 0.4 and 0.8 -> reference mode 0.6
        v = FeatureTensor(np.array([[1.0, 0.0]]))
        cand = ctx(np.array([[1.0, 0.0]]))
        # cos(a, r) = 0.4 and 0.8 via unit vectors at the right angles
        r1 = ctx(np.array([[0.4, np.sqrt(1 - 0.16)]]))
        r2 = ctx(np.array([[0.8, np.sqrt(1 - 0.64)]]))
        gt = GroundTruthSet(v, (r1, r2))
        out = score_instance(cand, gt, ScoringConfig(modes=(Mode.REFERENCE,), cov_kind=CovKind.IDENTITY))
        assert out[Mode.REFERENCE].relevance == pytest.approx(0.6, abs=1e-6)

    def test_declared_combination_rule(self):
        # image relevance 0.5 and reference relevance 0.7 -> combined 0.6
        v = FeatureTensor(np.array([[0.5, np.sqrt(0.75)]]))
        cand = ctx(np.array([[1.0, 0.0]]))
        ref = ctx(np.array([[0.7, np.sqrt(1 - 0.49)]]))
        gt = GroundTruthSet(v, (ref,))
        out = score_instance(cand, gt, ScoringConfig(cov_kind=CovKind.IDENTITY))
        assert out[Mode.IMAGE].relevance == pytest.approx(0.5, abs=1e-6)
        assert out[Mode.REFERENCE].relevance == pytest.approx(0.7, abs=1e-6)
        assert out[Mode.COMBINED].relevance == pytest.approx(0.6, abs=1e-6)

    def test_full_pipeline_matches_oracle_spot(self):
        rng = np.random.default_rng(97)
        for kind in (CovKind.IDENTITY, CovKind.DIAGONAL, CovKind.SHRINKAGE_FULL):
            v = rng.normal(size=(3, 5)).astype(np.float32)
            hc = rng.normal(size=(4, 5)).astype(np.float32)
            hr = [rng.normal(size=(2, 5)).astype(np.float32), rng.normal(size=(3, 5)).astype(np.float32)]
            attn = AttentionConfig(lam=9.0)
            cand = context_features(v, hc, attn)
            refs = tuple(context_features(v, h, attn, source=f"reference:{i}") for i, h in enumerate(hr))
            out = score_instance(cand, GroundTruthSet(FeatureTensor(v), refs), ScoringConfig(cov_kind=kind))
            want = score_instance_oracle(v, hc, hr, lam=9.0, kind=kind.value)
            for mode in ("image", "reference", "combined"):
                got = out[Mode(mode)]
                for axis, w in zip((got.relevance, got.extraness, got.omission), want[mode]):
                    assert axis == pytest.approx(w, abs=1e-6)


class TestMonotoneCorruption:
    """Statistical response to controlled corruption: more appended noise
    words must lower extraness, more deleted aligned words must lower
    omission; pooled Spearman over 5 levels x 100 instances <= -0.9."""

    LEVELS = 5
    TRIALS = 100

    def test_extraness_decreases_with_appended_noise_words(self):
        rng = np.random.default_rng(100)
        n, d, per_level = 6, 16, 3
        q, _ = np.linalg.qr(rng.standard_normal((d, n)))
        v = q.T.copy()
        gt = GroundTruthSet(FeatureTensor(v))
        cfg = ScoringConfig(modes=(Mode.IMAGE,), cov_kind=CovKind.IDENTITY)
        attn = AttentionConfig()
        scores, levels = [], []
        means = np.zeros(self.LEVELS)
        for _ in range(self.TRIALS):
            pool = rng.standard_normal((self.LEVELS * per_level, d))
            pool /= np.linalg.norm(pool, axis=1, keepdims=True)
            for k in range(self.LEVELS):
                words = np.vstack([v, pool[: k * per_level]]) if k else v
                s = score_instance(context_features(v, words, attn), gt, cfg)[Mode.IMAGE]
                scores.append(s.extraness)
                levels.append(k)
                means[k] += s.extraness
        means /= self.TRIALS
        assert all(b < a for a, b in zip(means, means[1:]))
        assert spearman_oracle(scores, levels) <= -0.9

    def test_omission_decreases_with_deleted_aligned_words(self):
        rng = np.random.default_rng(101)
        n, d = 5, 16
        q, _ = np.linalg.qr(rng.standard_normal((d, n)))
        v = q.T.copy()
        gt = GroundTruthSet(FeatureTensor(v))
        cfg = ScoringConfig(modes=(Mode.IMAGE,), cov_kind=CovKind.IDENTITY)
        attn = AttentionConfig()
        scores, levels = [], []
        means = np.zeros(self.LEVELS)
        for _ in range(self.TRIALS):
            order = rng.permutation(n)
            for k in range(self.LEVELS):
                words = v[np.sort(order[: n - k])]
                s = score_instance(context_features(v, words, attn), gt, cfg)[Mode.IMAGE]
                scores.append(s.omission)
                levels.append(k)
                means[k] += s.omission
        means /= self.TRIALS
        assert all(b < a for a, b in zip(means, means[1:]))
        assert spearman_oracle(scores, levels) <= -0.9
