import json
from statistics import fmean

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgewise import (
    ClassLabel,
    EvalItem,
    InvalidParamsError,
    REAL_LABELS,
    ReportError,
    SchemaError,
    emit_report,
    evaluate,
    load_eval_manifest,
    load_sweep_spec,
    load_traces,
    run_sweep,
)
import edgewise.bencheval as bencheval


@pytest.fixture(scope="module")
def table4_report(fixtures_dir_module):
    spec = load_sweep_spec(fixtures_dir_module / "table4.json")
    return run_sweep(spec)


@pytest.fixture(scope="module")
def fixtures_dir_module():
    from conftest import FIXTURES

    return FIXTURES


class TestSweep:
    def test_spec_loads_cross_product(self, fixtures_dir_module):
        spec = load_sweep_spec(fixtures_dir_module / "table4.json")
        assert len(spec.combos) == 4
        assert spec.baseline == "b0_default"
        assert spec.simulated_clock

    def test_mean_inference_times_exact(self, table4_report):
        means = {row.name: row.mean_inference_s for row in table4_report.rows}
        assert means == {
            "b0_default": 0.320,
            "fp32": 0.160,
            "fp16": 0.090,
            "fp16_75": 0.043,
        }

    def test_throughput(self, table4_report):
        ips = {row.name: row.ips for row in table4_report.rows}
        assert ips["b0_default"] == pytest.approx(3.125, rel=0.01)
        assert ips["fp32"] == pytest.approx(6.25, rel=0.01)
        assert ips["fp16"] == pytest.approx(11.1, rel=0.01)
        assert ips["fp16_75"] == pytest.approx(23.26, rel=0.01)

    def test_speedups_match_brute_force(self, table4_report, fixtures_dir_module):
        # independent recomputation straight from the raw trace samples
        traces = {
            t.name: t for t in load_traces(fixtures_dir_module / "traces/table4.json")
        }
        base = fmean(traces["b0_default"].samples_s)
        for row in table4_report.rows:
            expected = base / fmean(traces[row.name].samples_s)
            assert row.speedup == pytest.approx(expected, rel=1e-12)

    def test_baseline_speedup_is_one(self, table4_report):
        assert table4_report.row("b0_default").speedup == 1.0

    def test_accelerated_speedup_values(self, table4_report):
        assert table4_report.row("fp32").speedup == pytest.approx(2.0, rel=1e-9)
        assert table4_report.row("fp16").speedup == pytest.approx(3.5556, abs=1e-3)
        assert 7.3 <= table4_report.row("fp16_75").speedup <= 7.6

    def test_realtime_flags(self, table4_report):
        flags = {row.name: row.realtime for row in table4_report.rows}
        assert flags == {
            "b0_default": False,
            "fp32": False,
            "fp16": True,
            "fp16_75": True,
        }

    def test_efficiency_at_maxn(self, table4_report):
        row = table4_report.row("fp16_75")
        assert row.watts == 5.0
        assert row.efficiency == pytest.approx((1 / 0.043) / 5, rel=1e-9)
        assert row.efficiency == pytest.approx(4.65, abs=0.01)

    def test_single_combination_sweep(self, fixtures_dir_module, tmp_path):
        spec_file = tmp_path / "single.json"
        spec_file.write_text(
            json.dumps(
                {
                    "traces_file": str(fixtures_dir_module / "traces/table4.json"),
                    "traces": ["fp16"],
                    "baseline": "fp16",
                }
            )
        )
        report = run_sweep(load_sweep_spec(spec_file))
        assert len(report.rows) == 1
        assert report.rows[0].speedup == 1.0

    def test_failed_cell_does_not_abort_others(
        self, fixtures_dir_module, monkeypatch
    ):
        spec = load_sweep_spec(fixtures_dir_module / "table4.json")
        real = bencheval._measure_combo

        def flaky(combo, s):
            if combo.trace.name == "fp32":
                raise SchemaError("simulated trace fault")
            return real(combo, s)

        monkeypatch.setattr(bencheval, "_measure_combo", flaky)
        report = run_sweep(spec)
        assert report.row("fp32").error == "simulated trace fault"
        assert report.row("fp32").ips is None
        assert report.row("fp16").ips is not None

    def test_unknown_baseline_rejected(self, fixtures_dir_module, tmp_path):
        spec_file = tmp_path / "bad.json"
        spec_file.write_text(
            json.dumps(
                {
                    "traces_file": str(fixtures_dir_module / "traces/table4.json"),
                    "baseline": "nope",
                }
            )
        )
        with pytest.raises(SchemaError, match="baseline"):
            load_sweep_spec(spec_file)


class TestEvaluate:
    def test_real_world_fixture(self, fixtures_dir_module):
        items = load_eval_manifest(fixtures_dir_module / "eval_realworld.jsonl")
        report = evaluate(items)
        assert report.total == 40
        assert report.correct == 33
        assert report.flagged == 3
        assert report.accuracy_including_errors == 0.825
        assert report.accuracy_excluding_errors == 0.900
        assert report.per_category["cardboard"]["total"] == 9
        assert report.per_category["glass"]["total"] == 5
        assert report.per_category["metal"]["total"] == 6
        assert report.per_category["paper"]["total"] == 10
        assert report.per_category["plastic"]["total"] == 10

    def test_mixed_fixture(self, fixtures_dir_module):
        items = load_eval_manifest(fixtures_dir_module / "eval_mixed.jsonl")
        report = evaluate(items)
        assert report.total == 100
        assert report.accuracy_including_errors == 0.94
        assert report.accuracy_excluding_errors == 0.95

    def test_all_correct(self):
        items = [
            EvalItem(f"f{i}", label, label)
            for i, label in enumerate(REAL_LABELS * 8)
        ]
        report = evaluate(items)
        assert report.accuracy_including_errors == 1.0
        assert report.accuracy_excluding_errors == 1.0

    def test_confusion_matrix_consistency(self, fixtures_dir_module):
        items = load_eval_manifest(fixtures_dir_module / "eval_realworld.jsonl")
        report = evaluate(items)
        for i, label in enumerate(report.labels):
            assert sum(report.confusion[i]) == report.per_category[label]["total"]
        trace = sum(report.confusion[i][i] for i in range(len(report.labels)))
        assert trace / report.total == report.accuracy_including_errors

    def test_flag_on_correct_prediction_rejected(self):
        with pytest.raises(InvalidParamsError, match="correct"):
            EvalItem("f", ClassLabel.GLASS, ClassLabel.GLASS, error_flag="glare")

    def test_unknown_flag_rejected(self):
        with pytest.raises(InvalidParamsError, match="flag"):
            EvalItem("f", ClassLabel.GLASS, ClassLabel.METAL, error_flag="fog")

    def test_empty_items_rejected(self):
        with pytest.raises(InvalidParamsError):
            evaluate([])

    def test_equality_iff_no_flags(self):
        wrong_unflagged = [
            EvalItem("a", ClassLabel.GLASS, ClassLabel.METAL),
            EvalItem("b", ClassLabel.PAPER, ClassLabel.PAPER),
        ]
        report = evaluate(wrong_unflagged)
        assert report.accuracy_excluding_errors == report.accuracy_including_errors
        flagged = [
            EvalItem("a", ClassLabel.GLASS, ClassLabel.METAL, error_flag="glare"),
            EvalItem("b", ClassLabel.PAPER, ClassLabel.PAPER),
        ]
        report = evaluate(flagged)
        assert report.accuracy_excluding_errors > report.accuracy_including_errors

    def test_manifest_error_reports_line(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_text('{"file": "a", "truth": "glass", "predicted": "metal"}\n{bad')
        with pytest.raises(SchemaError, match=":2:"):
            load_eval_manifest(path)

    def test_manifest_missing_field(self, tmp_path):
        path = tmp_path / "items.jsonl"
        path.write_text('{"file": "a", "truth": "glass"}')
        with pytest.raises(SchemaError, match="predicted"):
            load_eval_manifest(path)

    @given(st.data())
    @settings(max_examples=300)
    def test_excluding_never_below_including(self, data):
        n = data.draw(st.integers(1, 30))
        items = []
        for i in range(n):
            truth = data.draw(st.sampled_from(REAL_LABELS))
            predicted = data.draw(st.sampled_from(REAL_LABELS))
            flag = None
            if predicted != truth and data.draw(st.booleans()):
                flag = data.draw(st.sampled_from(["glare", "zoom", "other"]))
            items.append(EvalItem(f"f{i}", truth, predicted, flag))
        report = evaluate(items)
        assert report.accuracy_excluding_errors >= report.accuracy_including_errors


class TestEmitReport:
    def test_bench_csv_has_four_data_rows(self, table4_report):
        data = emit_report(table4_report, "csv").decode()
        lines = data.strip().splitlines()
        assert len(lines) == 5
        assert lines[0].startswith("name,precision,resolution_scale")

    def test_emission_is_deterministic(self, table4_report):
        assert emit_report(table4_report, "csv") == emit_report(table4_report, "csv")
        assert emit_report(table4_report, "json") == emit_report(
            table4_report, "json"
        )

    def test_json_keys_sorted(self, table4_report):
        payload = json.loads(emit_report(table4_report, "json"))
        keys = list(payload)
        assert keys == sorted(keys)

    def test_eval_csv_per_category(self, fixtures_dir_module):
        items = load_eval_manifest(fixtures_dir_module / "eval_realworld.jsonl")
        data = emit_report(evaluate(items), "csv").decode()
        lines = data.strip().splitlines()
        assert lines[0] == "category,total,correct"
        assert lines[1] == "cardboard,9,7"
        assert len(lines) == 6

    def test_unsupported_format(self, table4_report):
        with pytest.raises(ReportError, match="unsupported format"):
            emit_report(table4_report, "xml")

    def test_empty_report_rejected(self):
        from edgewise import BenchReport

        with pytest.raises(ReportError, match="empty"):
            emit_report(BenchReport(baseline="x", rows=[]), "csv")
