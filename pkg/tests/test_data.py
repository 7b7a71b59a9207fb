import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pacts.data import (
    EpisodeDataset,
    Normalizer,
    decode_beliefs,
    encode_predicates,
    fit_normalizer,
    load_dataset,
    save_dataset,
    threshold_beliefs,
)
from pacts.errors import FormatError, NumericsError, ValidationError


def toy_dataset(n=12, d_o=3, d_a=2, j=2, seed=0):
    rng = np.random.default_rng(seed)
    return EpisodeDataset(
        observations=rng.normal(size=(n, d_o)).astype(np.float32),
        actions=rng.uniform(0, 512, size=(n, d_a)).astype(np.float32),
        predicates=rng.integers(0, 2, size=(n, j)).astype(np.float32),
        episode_starts=np.array([0, n // 2]),
        predicate_names=[f"p{i}" for i in range(j)],
        skill_labels=["a"] * (n // 2) + ["b"] * (n - n // 2),
        metadata={"seed": seed},
    )


class TestPredicateCodec:
    def test_encode_endpoints(self):
        assert encode_predicates(np.array([0.0])) == pytest.approx(-1.0)
        assert encode_predicates(np.array([1.0])) == pytest.approx(1.0)

    def test_encode_elementwise(self):
        out = encode_predicates(np.array([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(out, [[-1, 1], [1, -1]])

    def test_encode_rejects_nonbinary(self):
        with pytest.raises(ValidationError):
            encode_predicates(np.array([0.5]))

    def test_decode_endpoints_and_clamp(self):
        assert decode_beliefs(np.array([-1.0])) == pytest.approx(0.0)
        assert decode_beliefs(np.array([1.3])) == pytest.approx(1.0)
        assert decode_beliefs(np.array([0.0])) == pytest.approx(0.5)

    def test_decode_rejects_nan(self):
        with pytest.raises(NumericsError):
            decode_beliefs(np.array([np.nan]))

    @given(arrays(np.int64, (4, 3), elements=st.integers(0, 1)))
    def test_roundtrip_identity(self, labels):
        np.testing.assert_array_equal(decode_beliefs(encode_predicates(labels)), labels)


class TestThreshold:
    def test_examples(self):
        assert threshold_beliefs(np.array([0.73]))[0] == 1
        assert threshold_beliefs(np.array([0.50]))[0] == 0  # strict inequality
        assert threshold_beliefs(np.array([0.20]))[0] == 0

    def test_theta_validated(self):
        with pytest.raises(ValidationError):
            threshold_beliefs(np.array([0.5]), theta=1.5)

    @settings(max_examples=50)
    @given(
        arrays(np.float64, (5,), elements=st.floats(0, 1)),
        arrays(np.float64, (5,), elements=st.floats(0, 0.3)),
    )
    def test_monotone(self, z, bump):
        lo = threshold_beliefs(z)
        hi = threshold_beliefs(np.clip(z + bump, 0, 1))
        assert np.all(hi >= lo)


class TestNormalizer:
    def test_affine_map(self):
        ds = toy_dataset()
        ds.actions[:, 0] = np.linspace(0, 512, ds.n_steps)
        norm = fit_normalizer(ds)
        out = norm.normalize(np.array([256.0, ds.actions[0, 1]]), "action")
        assert out[0] == pytest.approx(0.0, abs=1e-9)
        assert norm.normalize(ds.actions.min(axis=0), "action")[0] == pytest.approx(-1.0)

    def test_constant_dim_widened(self):
        ds = toy_dataset()
        ds.observations[:, 1] = 7.0
        norm = fit_normalizer(ds)
        assert norm.normalize(ds.observations[0], "obs")[1] == pytest.approx(-1.0)

    def test_roundtrip(self):
        ds = toy_dataset()
        norm = fit_normalizer(ds)
        x = ds.observations[3].astype(np.float64)
        back = norm.denormalize(norm.normalize(x, "obs"), "obs")
        np.testing.assert_allclose(back, x, atol=1e-6)
        y = norm.normalize(ds.observations, "obs")
        assert y.min() >= -1 - 1e-9 and y.max() <= 1 + 1e-9

    def test_empty_dataset_rejected(self):
        ds = toy_dataset()
        empty = EpisodeDataset(
            observations=np.zeros((0, 3), np.float32),
            actions=np.zeros((0, 2), np.float32),
            predicates=np.zeros((0, 2), np.float32),
            episode_starts=np.zeros((0,), np.int64),
            predicate_names=ds.predicate_names,
        )
        with pytest.raises(ValidationError):
            fit_normalizer(empty)

    def test_dict_roundtrip(self):
        norm = fit_normalizer(toy_dataset())
        back = Normalizer.from_dict(norm.to_dict())
        np.testing.assert_array_equal(back.obs_min, norm.obs_min)
        np.testing.assert_array_equal(back.action_max, norm.action_max)


class TestDatasetIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        ds = toy_dataset()
        save_dataset(ds, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        np.testing.assert_array_equal(back.observations, ds.observations)
        np.testing.assert_array_equal(back.actions, ds.actions)
        np.testing.assert_array_equal(back.predicates, ds.predicates)
        np.testing.assert_array_equal(back.episode_starts, ds.episode_starts)
        assert back.predicate_names == ds.predicate_names
        assert back.skill_labels == ds.skill_labels
        assert back.metadata["seed"] == 0

    def test_shape_mismatch_rejected(self, tmp_path):
        ds = toy_dataset()
        save_dataset(ds, tmp_path / "d")
        meta = (tmp_path / "d" / "meta.json").read_text()
        (tmp_path / "d" / "meta.json").write_text(meta.replace('"J": 2', '"J": 3'))
        with pytest.raises(FormatError):
            load_dataset(tmp_path / "d")

    def test_truncated_array_rejected(self, tmp_path):
        ds = toy_dataset()
        save_dataset(ds, tmp_path / "d")
        (tmp_path / "d" / "actions.f32").write_bytes(b"")
        with pytest.raises(FormatError):
            load_dataset(tmp_path / "d")

    def test_missing_dir_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            load_dataset(tmp_path / "nope")

    def test_invariants_checked(self):
        ds = toy_dataset()
        with pytest.raises(ValidationError):
            EpisodeDataset(
                observations=ds.observations,
                actions=ds.actions,
                predicates=ds.predicates + 0.5,
                episode_starts=ds.episode_starts,
                predicate_names=ds.predicate_names,
            )
        with pytest.raises(ValidationError):
            EpisodeDataset(
                observations=ds.observations,
                actions=ds.actions,
                predicates=ds.predicates,
                episode_starts=np.array([1, 6]),
                predicate_names=ds.predicate_names,
            )
