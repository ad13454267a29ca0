import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgewise import (
    AccelConfig,
    ClassLabel,
    Classification,
    Frame,
    InvalidParamsError,
    REAL_LABELS,
    UnknownLabelError,
    parse_label,
    scaled_size,
)


class TestParseLabel:
    def test_case_normalisation(self):
        assert parse_label("Metal") is ClassLabel.METAL

    def test_lowercase_passthrough(self):
        assert parse_label("cardboard") is ClassLabel.CARDBOARD

    def test_unknown_label_named_in_error(self):
        with pytest.raises(UnknownLabelError, match="trash"):
            parse_label("trash")

    def test_none_is_not_parseable(self):
        with pytest.raises(UnknownLabelError):
            parse_label("none")

    @pytest.mark.parametrize("label", REAL_LABELS)
    def test_round_trip_identity(self, label):
        assert parse_label(str(label)) is label

    @given(st.sampled_from(REAL_LABELS), st.sampled_from(["lower", "upper", "title"]))
    def test_round_trip_any_casing(self, label, casing):
        text = getattr(str(label), casing)()
        assert parse_label(text) is label


class TestFrame:
    def test_valid(self):
        frame = Frame(2, 3, bytes(18), captured_at=0)
        assert frame.width == 2 and frame.height == 3

    def test_rejects_short_buffer(self):
        with pytest.raises(InvalidParamsError, match="expected 18"):
            Frame(2, 3, bytes(17), captured_at=0)

    def test_rejects_long_buffer(self):
        with pytest.raises(InvalidParamsError):
            Frame(2, 3, bytes(19), captured_at=0)

    def test_rejects_zero_dimension(self):
        with pytest.raises(InvalidParamsError):
            Frame(0, 3, b"", captured_at=0)

    @given(st.integers(1, 8), st.integers(1, 8), st.integers(-2, 2))
    def test_length_mismatch_always_rejected(self, w, h, delta):
        size = w * h * 3 + delta
        if delta == 0:
            Frame(w, h, bytes(size), captured_at=0)
        else:
            with pytest.raises(InvalidParamsError):
                Frame(w, h, bytes(max(size, 0)), captured_at=0)


class TestClassification:
    def test_valid(self):
        c = Classification(ClassLabel.GLASS, 0.5, 0.01, frame_ts=1)
        assert c.label is ClassLabel.GLASS

    def test_none_label_rejected(self):
        with pytest.raises(InvalidParamsError):
            Classification(ClassLabel.NONE, 0.5, 0.01, frame_ts=1)

    @pytest.mark.parametrize("confidence", [-0.01, 1.01])
    def test_confidence_bounds(self, confidence):
        with pytest.raises(InvalidParamsError):
            Classification(ClassLabel.GLASS, confidence, 0.01, frame_ts=1)

    def test_duration_must_be_positive(self):
        with pytest.raises(InvalidParamsError):
            Classification(ClassLabel.GLASS, 0.5, 0.0, frame_ts=1)


class TestAccelConfig:
    def test_defaults(self):
        accel = AccelConfig(name="default")
        assert accel.max_workspace_bytes == 33_554_432
        assert accel.max_batch == 1

    def test_scaled_input_sizes(self):
        assert AccelConfig(name="x", resolution_scale=1.0).input_size == (512, 384)
        assert AccelConfig(name="x", resolution_scale=0.75).input_size == (384, 288)
        assert AccelConfig(name="x", resolution_scale=0.5).input_size == (256, 192)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"precision": "int8"},
            {"max_workspace_bytes": 0},
            {"max_batch": 0},
            {"resolution_scale": 0.0},
            {"resolution_scale": 1.5},
        ],
    )
    def test_invalid_fields(self, kwargs):
        with pytest.raises(InvalidParamsError):
            AccelConfig(name="bad", **kwargs)


def test_scaled_size_bounds():
    with pytest.raises(InvalidParamsError):
        scaled_size(0.0)
    with pytest.raises(InvalidParamsError):
        scaled_size(1.2)
