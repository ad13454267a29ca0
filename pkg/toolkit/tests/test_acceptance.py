"""Toolkit acceptance: the protocol round-trip against the pipeline's own
client, and the desk-scale training smoke that stands in for the full-scale
accuracies (GPU-hours and a private dataset away)."""

from contextlib import contextmanager

import pytest

from ewtoolkit import split_dataset
from ewtoolkit.server import EchoPredictor, InferenceServer
from ewtoolkit.training import consolidate, export_model, train


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_protocol_round_trip_with_pipeline_client():
    edgewise = pytest.importorskip("edgewise")

    with criterion("serve: 100 client inferences, zero protocol errors"):
        predictor = EchoPredictor((384, 288))
        accel = edgewise.AccelConfig(name="served", resolution_scale=0.75)
        clock = edgewise.SimulatedClock()
        with InferenceServer(predictor) as server:
            source = edgewise.SyntheticSource(
                list(edgewise.REAL_LABELS), clock, frames=100
            )
            with edgewise.ExternalBackend(
                "127.0.0.1", server.port, accel=accel, clock=clock
            ) as backend:
                results = []
                for frame, _truth in source:
                    frame = edgewise.resize_to(frame, 384, 288)
                    results.append(backend.infer(frame))
        assert len(results) == 100
        for result in results:
            # every label came back parseable and every reply well-formed,
            # or infer() would have raised ProtocolError
            assert edgewise.parse_label(str(result.label)) is result.label
            assert 0.0 <= result.confidence <= 1.0
            assert result.inference_duration > 0


def test_training_smoke(smoke_source, smoke_config, tmp_path):
    with criterion(
        "train: 2+1 epochs on 50 images, history 3, accuracy > 0.2, "
        "lean export smaller"
    ):
        manifests = split_dataset(smoke_source, seed=5)
        assert len(manifests.all_entries()) == 50

        model, history = train(smoke_config, manifests.train, manifests.val)
        model, history = consolidate(
            model, smoke_config, manifests.train, manifests.val, history
        )
        assert len(history) == 3
        assert [row.phase for row in history] == [
            "train",
            "train",
            "consolidation",
        ]
        assert history[-1].train_accuracy > 0.2

        lean = export_model(model, tmp_path / "lean.h5", include_optimizer=False)
        full = export_model(model, tmp_path / "full.h5", include_optimizer=True)
        assert lean.stat().st_size < full.stat().st_size
