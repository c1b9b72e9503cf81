import numpy as np
import pytest

from spiketrim.data import (Dataset, SyntheticSpec, bayes_accuracy,
                            load_dataset, save_dataset, signature_positions,
                            synth_dataset)
from spiketrim.errors import ConfigError


class TestSpec:
    def test_probability_ordering(self):
        with pytest.raises(ConfigError):
            SyntheticSpec(p_signal=0.1, p_background=0.1)

    def test_signature_capacity(self):
        with pytest.raises(ConfigError):
            SyntheticSpec(grid=2, classes=4, signature_tokens=2)

    def test_token_count(self):
        assert SyntheticSpec(grid=8).n_tokens == 64


class TestGeneration:
    def test_byte_identical_repeat(self):
        spec = SyntheticSpec(train_samples=16, test_samples=8)
        a_train, a_test = synth_dataset(spec, 11)
        b_train, b_test = synth_dataset(spec, 11)
        assert a_train.frames.data.tobytes() == b_train.frames.data.tobytes()
        assert a_test.frames.data.tobytes() == b_test.frames.data.tobytes()
        assert (a_train.labels == b_train.labels).all()

    def test_splits_differ(self):
        spec = SyntheticSpec(train_samples=16, test_samples=16)
        train, test = synth_dataset(spec, 11)
        assert train.frames.data.tobytes() != test.frames.data.tobytes()

    def test_signature_positions_disjoint_and_shared(self):
        spec = SyntheticSpec()
        sig = signature_positions(spec, 4)
        seen = set()
        for c, pos in sig.items():
            assert len(pos) == spec.signature_tokens
            assert not (seen & set(pos))
            seen |= set(pos)
        train, test = synth_dataset(spec, 4)
        assert train.signature_positions == test.signature_positions == sig

    def test_signal_rate_separation(self):
        spec = SyntheticSpec(train_samples=64, test_samples=8)
        train, _ = synth_dataset(spec, 2)
        frames = train.frames.data.reshape(spec.steps, 64, spec.channels, -1)
        hot_rates, bg_rates = [], []
        for m in range(64):
            hot = list(train.signature_positions[int(train.labels[m])])
            bg = [i for i in range(spec.n_tokens) if i not in hot]
            hot_rates.append(frames[:, m, :, hot].mean())
            bg_rates.append(frames[:, m, :, bg].mean())
        assert np.mean(hot_rates) == pytest.approx(0.9, abs=0.03)
        assert np.mean(bg_rates) == pytest.approx(0.1, abs=0.02)

    def test_noise_free_extreme(self):
        spec = SyntheticSpec(p_signal=1.0, p_background=0.0, steps=1,
                             train_samples=8, test_samples=32)
        _, test = synth_dataset(spec, 9)
        frames = test.frames.data.reshape(1, 32, spec.channels, -1)
        for m in range(32):
            hot = list(test.signature_positions[int(test.labels[m])])
            assert frames[0, m, :, hot].min() == 1
        assert bayes_accuracy(test) == 1.0

    def test_bayes_near_chance_when_uninformative(self):
        # p_signal barely above p_background: bayes cannot do much
        spec = SyntheticSpec(p_signal=0.1001, p_background=0.1,
                             train_samples=8, test_samples=128)
        _, test = synth_dataset(spec, 1)
        acc = bayes_accuracy(test)
        assert acc < 0.5  # far below the separable regime

    def test_default_spec_bayes_ceiling(self):
        _, test = synth_dataset(SyntheticSpec(test_samples=128), 1)
        assert bayes_accuracy(test) == 1.0


class TestIo:
    def test_roundtrip(self, tmp_path):
        spec = SyntheticSpec(train_samples=8, test_samples=4)
        train, _ = synth_dataset(spec, 3)
        save_dataset(train, tmp_path / "d")
        back = load_dataset(tmp_path / "d")
        assert back.frames.data.tobytes() == train.frames.data.tobytes()
        assert (back.labels == train.labels).all()
        assert back.spec == spec
        assert back.signature_positions == train.signature_positions
