import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from comp_isac import (
    ResultRow,
    SweepSpec,
    emit_csv,
    epa,
    load_config,
    pod_closed_form,
    read_results,
    render_plots,
    run_pod_validation,
    run_rate_sweep,
)
from comp_isac.detection import DetectionSetup
from comp_isac.errors import ConfigError


class TestSweepSpec:
    def test_grid_inclusive_and_float_safe(self):
        spec = SweepSpec("pod_threshold", 0.1, 0.9, 0.1)
        assert len(spec.grid) == 9
        assert spec.grid[-1] == pytest.approx(0.9)
        one = SweepSpec("power_budget_db", 5.0, 5.0, 1.0)
        np.testing.assert_allclose(one.grid, [5.0])

    def test_validation(self):
        with pytest.raises(ConfigError):
            SweepSpec("bandwidth", 0, 1, 1)
        with pytest.raises(ConfigError):
            SweepSpec("pod_threshold", 0.1, 0.9, 0.0)
        with pytest.raises(ConfigError):
            SweepSpec("pod_threshold", 0.9, 0.1, 0.1)
        with pytest.raises(ConfigError):
            SweepSpec("pod_threshold", 0.1, 0.9, 0.1, schemes=("upa",))
        with pytest.raises(ConfigError):
            SweepSpec("pod_threshold", 0.1, 0.9, 0.1, trials=0)

    def test_scheme_string_normalized(self):
        spec = SweepSpec("pod_threshold", 0.5, 0.5, 0.1, schemes="epa")
        assert spec.schemes == ("epa",)


class TestRateSweep:
    def test_one_point_grid_one_row_per_scheme(self, scenario):
        spec = SweepSpec("power_budget_db", 15.0, 15.0, 1.0)
        rows = run_rate_sweep(scenario, spec)
        assert [r.scheme for r in rows] == ["ppa", "epa", "rpa"]
        assert all(r.sweep_value == 15.0 for r in rows)

    def test_ppa_dominates_and_budget_monotone(self, scenario):
        spec = SweepSpec("power_budget_db", 11.0, 15.0, 2.0, schemes=("ppa", "epa"))
        rows = run_rate_sweep(scenario, spec)
        by_scheme = {
            s: [r for r in rows if r.scheme == s and r.feasible] for s in ("ppa", "epa")
        }
        ppa_by_value = {r.sweep_value: r.sum_rate for r in by_scheme["ppa"]}
        for r in by_scheme["epa"]:
            assert ppa_by_value[r.sweep_value] >= r.sum_rate - 1e-9
        ppa_curve = [r.sum_rate for r in by_scheme["ppa"]]
        assert all(b >= a - 1e-9 for a, b in zip(ppa_curve, ppa_curve[1:]))

    def test_infeasible_rows_have_empty_metrics(self, scenario):
        spec = SweepSpec("power_budget_db", 8.0, 8.0, 1.0)
        rows = run_rate_sweep(scenario, spec)
        assert all(not r.feasible for r in rows)
        assert all(r.rates is None and math.isnan(r.sum_rate) for r in rows)

    def test_pod_threshold_sweep_nonincreasing(self, scenario):
        spec = SweepSpec("pod_threshold", 0.3, 0.9, 0.3, schemes=("ppa",))
        rows = run_rate_sweep(scenario, spec)
        feasible = [r.sum_rate for r in rows if r.feasible]
        assert len(feasible) >= 2
        assert all(b <= a + 1e-9 for a, b in zip(feasible, feasible[1:]))

    def test_worker_count_does_not_change_rows(self, scenario, tmp_path):
        spec1 = SweepSpec("power_budget_db", 9.0, 12.0, 1.5, workers=1)
        spec4 = SweepSpec("power_budget_db", 9.0, 12.0, 1.5, workers=4)
        p1, p4 = tmp_path / "w1.csv", tmp_path / "w4.csv"
        emit_csv(run_rate_sweep(scenario, spec1), p1)
        emit_csv(run_rate_sweep(scenario, spec4), p4)
        assert p1.read_bytes() == p4.read_bytes()


class TestPodValidation:
    def test_one_point_grid(self, scenario):
        spec = SweepSpec("power_budget_db", 9.0, 9.0, 1.0, schemes=("epa",), trials=300)
        rows = run_pod_validation(scenario, spec)
        assert len(rows) == 1
        row = rows[0]
        assert row.pod_mc is not None and row.pod_stderr is not None
        assert row.pod_mc.shape == (3,)

    def test_closed_column_matches_library_call(self, scenario, realization):
        spec = SweepSpec("power_budget_db", 9.0, 9.0, 1.0, schemes=("epa",), trials=200)
        row = run_pod_validation(scenario, spec)[0]
        sc = scenario.replace(power_budget_db=9.0)
        P = epa(sc, realization).P
        for i in range(3):
            setup = DetectionSetup.from_scenario(sc, target=i)
            expected = pod_closed_form(
                P, realization.g[:, i], setup.sigma_s2, sc.N, setup.delta, 3
            )
            assert row.pod_closed[i] == expected  # same code path, exact

    def test_mc_tracks_closed_form_lightly(self, scenario):
        spec = SweepSpec("power_budget_db", 6.0, 10.0, 4.0, schemes=("epa",), trials=2000)
        for row in run_pod_validation(scenario, spec):
            for i in range(3):
                se = max(
                    row.pod_stderr[i],
                    math.sqrt(row.pod_closed[i] * (1 - row.pod_closed[i]) / spec.trials),
                )
                assert abs(row.pod_mc[i] - row.pod_closed[i]) <= 4 * se + 0.015


class TestCsv:
    def make_rows(self):
        return [
            ResultRow(
                sweep_variable="power_budget_db",
                sweep_value=9.0,
                scheme="ppa",
                feasible=True,
                sum_rate=4.25,
                rates=np.array([1.0, 2.0, 1.25]),
                pod_closed=np.array([0.9, 0.8, 0.7]),
                iterations=5,
            ),
            ResultRow(
                sweep_variable="power_budget_db",
                sweep_value=9.0,
                scheme="epa",
                feasible=False,
            ),
        ]

    def test_header_only_for_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        content = path.read_text()
        assert content == "sweep_variable,sweep_value,scheme,feasible,sum_rate,iterations\n"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "roundtrip.csv"
        rows = self.make_rows()
        emit_csv(rows, path)
        back = read_results(path)
        assert len(back) == 2
        assert back[0].scheme == "ppa" and back[0].feasible
        np.testing.assert_allclose(back[0].rates, rows[0].rates, rtol=1e-9)
        np.testing.assert_allclose(back[0].pod_closed, rows[0].pod_closed, rtol=1e-9)
        assert back[0].iterations == 5
        assert not back[1].feasible and back[1].rates is None
        assert math.isnan(back[1].sum_rate)

    def test_nine_significant_digits(self, tmp_path):
        row = self.make_rows()[0]
        row.sum_rate = math.pi
        path = tmp_path / "sig.csv"
        emit_csv([row], path)
        assert "3.14159265" in path.read_text()

    def test_identical_inputs_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(self.make_rows(), a)
        emit_csv(self.make_rows(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_parse_errors_name_the_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "sweep_variable,sweep_value,scheme,feasible,sum_rate,iterations\n"
            "power_budget_db,9.0,ppa,true,4.25,5\n"
            "power_budget_db,not_a_number,ppa,true,4.25,5\n"
        )
        with pytest.raises(ConfigError) as info:
            read_results(path)
        assert ":3" in info.value.key

    def test_feasible_field_validated(self, tmp_path):
        path = tmp_path / "badflag.csv"
        path.write_text(
            "sweep_variable,sweep_value,scheme,feasible,sum_rate,iterations\n"
            "power_budget_db,9.0,ppa,yes,4.25,5\n"
        )
        with pytest.raises(ConfigError):
            read_results(path)


class TestPlots:
    def test_single_row_plot(self, tmp_path):
        path = tmp_path / "single.csv"
        emit_csv(TestCsv().make_rows()[:1], path)
        (svg,) = render_plots(path, tmp_path)
        ET.parse(svg)  # well-formed XML

    def test_series_count_matches_schemes(self, scenario, tmp_path):
        spec = SweepSpec("power_budget_db", 11.0, 13.0, 1.0, schemes=("ppa", "epa"))
        rows = run_rate_sweep(scenario, spec)
        path = tmp_path / "sweep.csv"
        emit_csv(rows, path)
        (svg,) = render_plots(path, tmp_path)
        text = svg.read_text()
        labels = [e.text for e in ET.parse(svg).iter() if e.tag.endswith("text")]
        assert "ppa" in labels and "epa" in labels and "rpa" not in labels

    def test_validation_plot_has_closed_and_mc_series(self, scenario, tmp_path):
        spec = SweepSpec("power_budget_db", 8.0, 10.0, 2.0, schemes=("epa",), trials=200)
        rows = run_pod_validation(scenario, spec)
        path = tmp_path / "val.csv"
        emit_csv(rows, path)
        (svg,) = render_plots(path, tmp_path)
        labels = [e.text for e in ET.parse(svg).iter() if e.tag.endswith("text")]
        assert any(label and "closed form" in label for label in labels)
        assert any(label and "Monte Carlo" in label for label in labels)


class TestConfigLoading:
    def test_defaults_without_path(self):
        cfg = load_config()
        assert cfg.scenario.L == 3
        assert set(cfg.sweeps) == {"budget", "pod", "pod_validation"}
        assert cfg.sweeps["budget"].grid[0] == 8.0
        assert cfg.sweeps["pod_validation"].schemes == ("epa",)

    def test_full_file(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text(
            "scenario:\n"
            "  L: 2\n"
            "  seed: 9\n"
            "sweep:\n"
            "  trials: 500\n"
            "  schemes: [ppa, epa]\n"
            "  budget:\n"
            "    start: 10.0\n"
            "    stop: 12.0\n"
            "    step: 1.0\n"
        )
        cfg = load_config(path)
        assert cfg.scenario.L == 2 and cfg.scenario.seed == 9
        assert cfg.sweeps["budget"].schemes == ("ppa", "epa")
        assert cfg.sweeps["budget"].trials == 500
        assert cfg.sweeps["pod"].trials == 500  # shared key applies everywhere
        np.testing.assert_allclose(cfg.sweeps["budget"].grid, [10.0, 11.0, 12.0])

    def test_unknown_keys_rejected_by_name(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("simulation:\n  x: 1\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.key == "simulation"
        path.write_text("sweep:\n  budget:\n    begin: 1\n")
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert info.value.key == "begin"

    def test_missing_file_and_bad_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")
        path = tmp_path / "broken.yaml"
        path.write_text("scenario: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path)
