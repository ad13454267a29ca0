import math

import pytest

from ewtoolkit import split_dataset
from ewtoolkit.lrfinder import LRFinderError, find_learning_rate, log_spaced
from ewtoolkit.training import TrainConfig


@pytest.fixture(scope="module")
def tiny_train_set(tmp_path_factory):
    from conftest import build_source

    source = build_source(tmp_path_factory.mktemp("lr_source"), per_category=6)
    return split_dataset(source, seed=2).train


@pytest.fixture(scope="module")
def probe_config():
    return TrainConfig(
        base_model="tiny",
        pretrained=False,
        learning_rate=1e-3,
        consolidation_lr=1e-4,
        epochs=1,
        base_resolution=(64, 48),
        seed=11,
    )


class TestLogSpacing:
    def test_endpoints_and_monotone(self):
        rates = log_spaced(1e-6, 1e-4, 5)
        assert rates[0] == pytest.approx(1e-6)
        assert rates[-1] == pytest.approx(1e-4)
        assert all(a < b for a, b in zip(rates, rates[1:]))
        ratios = [b / a for a, b in zip(rates, rates[1:])]
        assert all(r == pytest.approx(ratios[0], rel=1e-9) for r in ratios)

    def test_single_candidate(self):
        assert log_spaced(1e-6, 1e-4, 1) == [1e-4]

    def test_bad_range(self):
        with pytest.raises(ValueError):
            log_spaced(1e-4, 1e-6, 3)


class TestScan:
    def test_single_rate_scan_returns_it(self, probe_config, tiny_train_set):
        result = find_learning_rate(
            probe_config, tiny_train_set, candidates=[3e-4], probe_epochs=1
        )
        assert result.rate == 3e-4
        assert set(result.losses) == {3e-4}
        assert math.isfinite(result.losses[3e-4])

    def test_smoke_scan_picks_minimum_loss(self, probe_config, tiny_train_set):
        candidates = [1e-5, 3e-4, 3e-3]
        result = find_learning_rate(
            probe_config, tiny_train_set, candidates=candidates, probe_epochs=2
        )
        assert result.rate in candidates
        finite = {r: l for r, l in result.losses.items() if math.isfinite(l)}
        assert finite, "probe losses should be finite on the smoke set"
        assert result.rate == min(finite, key=finite.get)

    def test_scan_stays_below_upper_bound(self, probe_config, tiny_train_set):
        result = find_learning_rate(
            probe_config, tiny_train_set, upper=1e-4, count=3, probe_epochs=1
        )
        assert all(rate <= 1e-4 for rate in result.losses)

    def test_all_divergent_raises_with_table(self, probe_config, tiny_train_set,
                                             monkeypatch):
        import ewtoolkit.lrfinder as lrfinder

        class FakeHistory:
            history = {"loss": [float("nan")]}

        def exploding_fit(self, *args, **kwargs):
            return FakeHistory()

        monkeypatch.setattr("keras.Model.fit", exploding_fit)
        with pytest.raises(LRFinderError) as excinfo:
            lrfinder.find_learning_rate(
                probe_config, tiny_train_set, candidates=[1e-5, 1e-4]
            )
        assert set(excinfo.value.losses) == {1e-5, 1e-4}
