import math
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from halfspace_boussinesq.decay_analysis import COLUMNS, NormSeries
from halfspace_boussinesq.harness.config import PRESETS, ConfigError, RunConfig, parse_config
from halfspace_boussinesq.harness.experiments import (
    FitFailure,
    energy_balance_run,
    load_state,
    read_csv,
    run_experiment,
    save_state,
    write_csv,
)
from halfspace_boussinesq.harness.svg import loglog_svg


def strip_version(text):
    return [line for line in text.splitlines() if "version" not in line]


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    start = time.perf_counter()
    result = run_experiment(PRESETS["nonlinear-smoke"](), out_dir=out)
    return result, time.perf_counter() - start, out


class TestNonlinearSmoke:
    def test_fast_and_energy_balanced(self, smoke):
        result, elapsed, _ = smoke
        assert elapsed < 60.0
        d = result.diagnostics
        assert d["energy_balance_residual"] <= 1e-4
        assert d["energy_increases"] == 0
        assert d["max_divergence_residual"] <= 1e-10
        assert d["max_boundary_trace"] <= 1e-9
        assert d["steps"] == 100

    def test_artifacts(self, smoke):
        result, _, out = smoke
        names = {p.name for p in out.iterdir()}
        assert names == {"norms.csv", "fit_summary.txt", "config.txt", "norms.svg", "final_state.npz"}
        assert parse_config((out / "config.txt").read_text()) == result.config
        summary = (out / "fit_summary.txt").read_text()
        assert "fit.u.exponent" in summary and "diag.energy_balance_residual" in summary
        assert "expected.u = -0.445" in summary

    def test_csv_schema(self, smoke):
        _, _, out = smoke
        text = (out / "norms.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# halfspace-boussinesq norms csv format 1")
        for c in COLUMNS:
            assert any(line.startswith(f"# column {c}: ") for line in lines)
        header = next(line for line in lines if not line.startswith("#"))
        assert header == ",".join(COLUMNS)
        series = read_csv(text)
        assert len(series) == 101
        assert np.all(np.diff(series.t) > 0)
        assert series.sigma == 0.95

    def test_csv_round_trip_is_exact(self, smoke):
        result, _, out = smoke
        back = read_csv((out / "norms.csv").read_text())
        np.testing.assert_array_equal(back.as_array(), result.series.as_array())

    def test_svg_is_well_formed(self, smoke):
        _, _, out = smoke
        root = ET.fromstring((out / "norms.svg").read_text())
        assert root.tag.endswith("svg")
        assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 4

    def test_final_state_round_trip(self, smoke):
        result, _, out = smoke
        s = load_state(out / "final_state.npz")
        np.testing.assert_array_equal(s.data, result.final_state.data)
        assert s.grid == result.final_state.grid

    def test_deterministic(self, smoke, tmp_path):
        _, _, out = smoke
        run_experiment(PRESETS["nonlinear-smoke"](), out_dir=tmp_path)
        a = strip_version((out / "norms.csv").read_text())
        b = strip_version((tmp_path / "norms.csv").read_text())
        assert a == b


class TestOtherModes:
    def test_heat_only_preset(self, tmp_path):
        result = run_experiment(PRESETS["linear-heat-only"](), out_dir=tmp_path)
        assert result.fits["u"].exponent == pytest.approx(-1.0, abs=0.03)
        assert result.fits["theta"] is None
        assert (tmp_path / "norms.svg").exists()

    def test_linear_mode(self, tmp_path):
        cfg = PRESETS["linear-grid"]().with_overrides(
            grid={"N_h": 16, "N3": 8, "L_h": 4 * math.pi}, run={"T": 20.0, "n_records": 20}
        )
        result = run_experiment(cfg, out_dir=tmp_path)
        u = result.series.column("u")
        assert np.all(np.diff(u) <= 0)
        assert result.fits["grad_h_u"].exponent < result.fits["u"].exponent
        assert "state" in result.paths

    def test_oracle_needs_equal_diffusivities(self):
        cfg = PRESETS["oracle"]().with_overrides(physics={"kappa": 0.5})
        with pytest.raises(ConfigError):
            run_experiment(cfg, write=False)

    def test_inadmissible_profile(self):
        cfg = PRESETS["oracle"]().with_overrides(init={"a": 0.5})
        with pytest.raises(ConfigError):
            run_experiment(cfg, write=False)

    def test_short_run_cannot_be_fitted(self):
        cfg = PRESETS["nonlinear-smoke"]().with_overrides(run={"T": 0.05, "t_first": 0.01})
        with pytest.raises(FitFailure):
            run_experiment(cfg, write=False)

    def test_no_write(self, tmp_path):
        cfg = PRESETS["linear-heat-only"]().with_overrides(output={"dir": str(tmp_path / "x")})
        result = run_experiment(cfg, write=False)
        assert result.paths == {}
        assert not (tmp_path / "x").exists()


class TestEnergyBalanceRun:
    def test_residual_and_monotone_energy(self, smooth_state):
        series = NormSeries(0.95)
        seen = []
        final, bal = energy_balance_run(
            smooth_state, 0.005, 0.1, record_every=5, series=series,
            on_record=lambda k, t, s: seen.append(k),
        )
        assert bal.residual <= 1e-6
        assert bal.increases == 0
        assert bal.steps == 20 and seen == list(range(1, 21))
        assert len(series) == 5
        assert np.all(np.diff(bal.energy) <= 0)


class TestCsvAndSvg:
    def test_write_read_synthetic(self):
        s = NormSeries(0.9)
        for t in (0.0, 1.0 / 3.0, 2.0):
            s.append({c: (t if c == "t" else math.pi * (1 + t)) for c in COLUMNS})
        text = write_csv(s, RunConfig())
        assert "# mode nonlinear seed 0" in text
        np.testing.assert_array_equal(read_csv(text).as_array(), s.as_array())

    def test_read_rejects_foreign_columns(self):
        with pytest.raises(ValueError):
            read_csv("t,a,b\n0,1,2\n")
        with pytest.raises(ValueError):
            read_csv("# only comments\n")

    def test_reference_slopes_and_escaping(self):
        t = np.geomspace(1, 100, 10)
        svg = loglog_svg(t, {"a<b": (1 + t) ** -1.0, "zero": np.zeros(10)},
                         references={"guide": (-1.0, "a<b"), "orphan": (-2.0, "missing")},
                         title="x & y")
        root = ET.fromstring(svg)
        texts = [e.text for e in root.iter("{http://www.w3.org/2000/svg}text")]
        assert "a<b" in texts and "x & y" in texts
        assert any(t and t.startswith("guide slope -1") for t in texts)
        assert not any(t and "orphan" in t for t in texts)

    def test_nothing_to_plot(self):
        with pytest.raises(ValueError):
            loglog_svg([0, 1], {"a": [0.0, -1.0]})


def test_save_load_state(tmp_path, smooth_state):
    save_state(tmp_path / "s.npz", smooth_state)
    back = load_state(tmp_path / "s.npz")
    np.testing.assert_array_equal(back.data, smooth_state.data)
    assert (back.nu, back.kappa) == (smooth_state.nu, smooth_state.kappa)
