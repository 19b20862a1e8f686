import multiprocessing as mp

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shemo_ser.corpus import AudioClip, normalize_samples
from shemo_ser.features import (
    CacheCorrupt,
    CacheMiss,
    ExtractorError,
    FeatureCache,
    FeatureMap,
    PooledVector,
    ResizedMap,
    SyntheticExtractor,
    cache_get,
    cache_put,
    mean_pool,
    resize_array,
    resize_to_square,
)
from shemo_ser.features.extractors import frame_count


def clip_of(samples, sr=16000):
    return AudioClip(np.asarray(samples, dtype=np.float32), sr, "anger", "s", "mem://clip", 1.0)


def fmap_of(values):
    return FeatureMap(np.asarray(values, dtype=np.float32), 0, "test", "mem://clip")


@pytest.fixture(scope="module")
def extractor():
    return SyntheticExtractor(seed=0)


class TestSyntheticExtractor:
    def test_reference_shape(self, extractor):
        x = normalize_samples(np.random.default_rng(0).uniform(-0.5, 0.5, 48000).astype(np.float32), 16000)
        fm = extractor.extract(clip_of(x), 0)
        assert fm.values.shape == (349, 1024)
        assert fm.values.dtype == np.float32
        assert np.all(np.isfinite(fm.values))

    def test_deterministic(self, extractor):
        x = np.random.default_rng(1).uniform(-0.5, 0.5, 112000)
        a = extractor.extract(clip_of(x), 0).values
        b = SyntheticExtractor(seed=0).extract(clip_of(x), 0).values
        assert a.tobytes() == b.tobytes()

    def test_silence_gives_bias_rows(self, extractor):
        fm = extractor.extract(clip_of(np.zeros(112000)), 0)
        np.testing.assert_array_equal(fm.values, np.broadcast_to(extractor.bias, fm.values.shape))

    def test_frame_count_law(self):
        counts = [frame_count(n) for n in range(0, 120000, 997)]
        assert counts == sorted(counts)
        assert frame_count(112000) == 349

    def test_rejects_unnormalized_rate(self, extractor):
        with pytest.raises(ExtractorError, match="16000"):
            extractor.extract(clip_of(np.zeros(1000), sr=44100), 0)

    @pytest.mark.parametrize("layer", [-1, 1, 24])
    def test_layer_out_of_range(self, extractor, layer):
        with pytest.raises(ExtractorError, match="< 1"):
            extractor.extract(clip_of(np.zeros(112000)), layer)

    def test_tones_are_separable(self, extractor):
        t = np.arange(112000) / 16000
        pooled = [mean_pool(extractor.extract(clip_of(0.4 * np.sin(2 * np.pi * f * t)), 0)).values for f in (200, 400, 800)]
        d = [np.linalg.norm(pooled[i] - pooled[j]) for i, j in ((0, 1), (1, 2), (0, 2))]
        assert min(d) > 1.0


class TestMeanPool:
    def test_identity_rows(self):
        v = np.arange(6, dtype=np.float32)
        np.testing.assert_array_equal(mean_pool(fmap_of(np.tile(v, (5, 1)))).values, v)

    def test_two_by_two(self):
        np.testing.assert_array_equal(mean_pool(fmap_of([[1, 3], [3, 5]])).values, [2, 4])

    def test_against_summation_oracle(self):
        m = np.random.default_rng(4).standard_normal((349, 1024)).astype(np.float32)
        oracle = [0.0] * 1024
        for j in range(1024):
            total = 0.0
            for i in range(349):
                total += float(m[i, j])
            oracle[j] = total / 349
        np.testing.assert_allclose(mean_pool(fmap_of(m)).values, oracle, rtol=1e-6, atol=1e-7)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_pool(fmap_of(np.zeros((0, 4))))

    @settings(max_examples=50)
    @given(
        arrays(np.float32, (7, 5), elements=st.floats(-100, 100, width=32)),
        arrays(np.float32, (7, 5), elements=st.floats(-100, 100, width=32)),
        st.floats(-3, 3),
        st.floats(-3, 3),
    )
    def test_linearity(self, m, n, a, b):
        lhs = mean_pool(fmap_of(a * m.astype(np.float64) + b * n.astype(np.float64))).values
        rhs = a * mean_pool(fmap_of(m)).values.astype(np.float64) + b * mean_pool(fmap_of(n)).values
        # Float32 cannot represent magnitudes below ~1e-38; that floor is the only absolute slack.
        scale = abs(a) * np.abs(m).max() + abs(b) * np.abs(n).max()
        np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-6 * scale + 1e-30)


def bilinear_oracle(a, out_rows, out_cols):
    h, w = a.shape
    out = np.empty((out_rows, out_cols))
    for i in range(out_rows):
        y = i * (h - 1) / (out_rows - 1)
        y0 = min(int(y), h - 2)
        dy = y - y0
        for j in range(out_cols):
            x = j * (w - 1) / (out_cols - 1)
            x0 = min(int(x), w - 2)
            dx = x - x0
            out[i, j] = (
                a[y0, x0] * (1 - dy) * (1 - dx)
                + a[y0, x0 + 1] * (1 - dy) * dx
                + a[y0 + 1, x0] * dy * (1 - dx)
                + a[y0 + 1, x0 + 1] * dy * dx
            )
    return out


class TestResize:
    def test_constant(self):
        out = resize_to_square(fmap_of(np.full((349, 1024), 2.5)))
        assert out.values.shape == (300, 300)
        assert np.all(out.values == np.float32(2.5))

    def test_identity_grid(self):
        m = np.random.default_rng(5).standard_normal((300, 300)).astype(np.float32)
        np.testing.assert_allclose(resize_to_square(fmap_of(m)).values, m, atol=1e-6)

    def test_separable_ramp(self):
        i, j = np.meshgrid(np.arange(349), np.arange(1024), indexing="ij")
        ramp = (i + j).astype(np.float32)
        out = resize_to_square(fmap_of(ramp)).values
        assert (out[0, 0], out[-1, 0], out[0, -1], out[-1, -1]) == (0, 348, 1023, 1371)
        oracle = bilinear_oracle(ramp.astype(np.float64), 300, 300)
        np.testing.assert_allclose(resize_array(ramp, 300, dtype=np.float64), oracle, atol=1e-5, rtol=0)
        # The float32 contract output differs from the oracle only by float32 rounding.
        np.testing.assert_allclose(out, oracle, rtol=2**-24, atol=0)

    def test_random_map_matches_oracle(self):
        m = np.random.default_rng(6).standard_normal((37, 53)).astype(np.float32)
        np.testing.assert_allclose(resize_array(m, 300), bilinear_oracle(m.astype(np.float64), 300, 300), atol=1e-5)

    def test_nearest(self):
        m = np.arange(12, dtype=np.float32).reshape(3, 4)
        out = resize_to_square(fmap_of(m), size=300, interpolation="nearest")
        assert out.interpolation == "nearest"
        assert set(np.unique(out.values)) <= set(m.ravel())

    @pytest.mark.parametrize("shape", [(1, 10), (10, 1), (1, 1)])
    def test_degenerate(self, shape):
        with pytest.raises(ValueError):
            resize_to_square(fmap_of(np.zeros(shape)))

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(2, 40),
        st.integers(2, 40),
        st.integers(0, 2**31 - 1),
    )
    def test_bounds(self, h, w, seed):
        m = np.random.default_rng(seed).uniform(-1e3, 1e3, (h, w)).astype(np.float32)
        out = resize_array(m, 300)
        assert out.min() >= m.min() and out.max() <= m.max()


class TestCache:
    def test_round_trip_all_kinds(self, tmp_path):
        rng = np.random.default_rng(7)
        objs = [
            FeatureMap(rng.standard_normal((349, 16)).astype(np.float32), 0, "x", "a.wav"),
            PooledVector(rng.standard_normal(16).astype(np.float32), 0, "x", "a.wav"),
            ResizedMap(rng.standard_normal((30, 30)).astype(np.float32), 0, "x", "a.wav"),
        ]
        keys = [cache_put(o, tmp_path) for o in objs]
        assert len(set(keys)) == 3
        for o, k in zip(objs, keys):
            back = cache_get(k, tmp_path)
            assert type(back) is type(o)
            assert back.values.tobytes() == o.values.tobytes()
            assert (back.clip_ref, back.extractor_id, back.layer_index) == ("a.wav", "x", 0)

    def test_key_is_content_hash(self, tmp_path):
        c = FeatureCache(tmp_path)
        a = FeatureMap(np.zeros((2, 2), np.float32), 0, "x", "a.wav")
        assert c.key_for(a) == c.key_for(FeatureMap(np.ones((2, 2), np.float32), 0, "x", "a.wav"))
        assert c.key_for(a) != c.key_for(FeatureMap(a.values, 1, "x", "a.wav"))
        assert c.key_for(a) != c.key_for(FeatureMap(a.values, 0, "y", "a.wav"))

    def test_miss(self, tmp_path):
        with pytest.raises(CacheMiss):
            cache_get("0" * 40, tmp_path)

    def test_header_layout(self, tmp_path):
        key = cache_put(FeatureMap(np.ones((3, 2), np.float32), 0, "x", "a"), tmp_path)
        blob = (tmp_path / f"{key}.serf").read_bytes()
        assert blob[:4] == b"SERF"
        assert int.from_bytes(blob[4:6], "little") == 1
        assert int.from_bytes(blob[6:10], "little") == 3
        assert int.from_bytes(blob[10:14], "little") == 2
        assert blob[14] == 0
        assert len(blob) == 19 + 3 * 2 * 4

    def test_every_flipped_byte_detected(self, tmp_path):
        key = cache_put(FeatureMap(np.random.default_rng(8).standard_normal((4, 5)).astype(np.float32), 0, "x", "a"), tmp_path)
        path = tmp_path / f"{key}.serf"
        original = path.read_bytes()
        for pos in range(len(original)):
            corrupted = bytearray(original)
            corrupted[pos] ^= 0x5A
            path.write_bytes(bytes(corrupted))
            with pytest.raises(CacheCorrupt):
                cache_get(key, tmp_path)
        path.write_bytes(original)
        cache_get(key, tmp_path)

    def test_truncated(self, tmp_path):
        key = cache_put(FeatureMap(np.ones((4, 4), np.float32), 0, "x", "a"), tmp_path)
        path = tmp_path / f"{key}.serf"
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CacheCorrupt, match="truncated"):
            cache_get(key, tmp_path)

    def test_version_mismatch(self, tmp_path):
        key = cache_put(FeatureMap(np.ones((2, 2), np.float32), 0, "x", "a"), tmp_path)
        path = tmp_path / f"{key}.serf"
        blob = bytearray(path.read_bytes())
        blob[4:6] = (9).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(CacheCorrupt, match="version"):
            cache_get(key, tmp_path)

    def test_concurrent_writers(self, tmp_path):
        values = np.random.default_rng(9).standard_normal((349, 64)).astype(np.float32)
        ctx = mp.get_context("fork")
        procs = [ctx.Process(target=_writer, args=(str(tmp_path), values, 25)) for _ in range(2)]
        for p in procs:
            p.start()
        key = FeatureCache(tmp_path).key_for(FeatureMap(values, 0, "x", "same.wav"))
        reads = 0
        while any(p.is_alive() for p in procs):
            try:
                got = cache_get(key, tmp_path)
            except CacheMiss:
                continue
            assert got.values.tobytes() == values.tobytes()
            reads += 1
        for p in procs:
            p.join()
            assert p.exitcode == 0
        assert sorted(f.suffix for f in tmp_path.iterdir()) == [".json", ".serf"]
        assert cache_get(key, tmp_path).values.tobytes() == values.tobytes()


def _writer(cache_dir, values, n):
    for _ in range(n):
        cache_put(FeatureMap(values, 0, "x", "same.wav"), cache_dir)


@pytest.fixture(scope="module")
def tiny_wav2vec(tmp_path_factory):
    transformers = pytest.importorskip("transformers")
    import torch

    torch.manual_seed(0)
    cfg = transformers.Wav2Vec2Config(
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        conv_dim=(16,) * 7,
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=4,
        do_stable_layer_norm=True,
        feat_extract_norm="layer",
    )
    path = tmp_path_factory.mktemp("w2v") / "tiny-xlsr"
    transformers.Wav2Vec2Model(cfg).save_pretrained(path)
    return path


class TestWav2Vec2Adapter:
    def test_frames_and_layers(self, tiny_wav2vec):
        from shemo_ser.features import Wav2Vec2Extractor

        ex = Wav2Vec2Extractor(tiny_wav2vec)
        assert ex.n_layers == 3 and ex.channels == 32
        x = np.random.default_rng(0).uniform(-0.3, 0.3, 112000)
        maps = [ex.extract(clip_of(x), k) for k in range(3)]
        assert all(m.values.shape == (349, 32) for m in maps)
        assert maps[0].values.tobytes() == ex.extract(clip_of(x), 0).values.tobytes()
        assert not np.allclose(maps[0].values, maps[2].values)
        assert "sha256=" in ex.extractor_id
        with pytest.raises(ExtractorError, match="< 3"):
            ex.extract(clip_of(x), 3)

    def test_missing_artifact(self, tmp_path):
        from shemo_ser.features import Wav2Vec2Extractor

        with pytest.raises(ExtractorError, match="not found"):
            Wav2Vec2Extractor(tmp_path / "absent")
