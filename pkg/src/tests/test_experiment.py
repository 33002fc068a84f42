"""Test cases for experiment planning, merging and the async job runner."""

import json

import pytest

from src.soog.artifacts import summary_meta_path, write_curve_rows
from src.soog.config import CFRConfig, ExperimentConfig
from src.soog.experiment import (
    METRICS,
    ORDERINGS,
    collect_curve_rows,
    estimate_delta,
    final_rows,
    merge_reports,
    plan_jobs,
    run_experiment,
    write_comparison,
)


def _row(scenario, algorithm, eps, seed=0, iteration=10, eps1=None, eps2=None):
    return {
        "scenario": scenario, "algorithm": algorithm, "seed": seed, "iteration": iteration,
        "eps1_chips": eps if eps1 is None else eps1, "eps2_chips": eps if eps2 is None else eps2,
        "eps_chips": eps, "eps_milliante": 1000 * eps,
    }


class TestPlanning:
    """Test job planning."""

    def test_one_job_per_seed_for_clustering(self):
        """Test that only clustered algorithms repeat over seeds."""
        config = ExperimentConfig(report_algorithms=["paaemd", "paoi", "li"], report_seeds=3)
        jobs = plan_jobs(config)
        assert len(jobs) == 2 * (3 + 1 + 1)
        paaemd = [j.seed for j in jobs if j.scenario == "symmetric" and j.algorithm == "paaemd"]
        assert paaemd == config.report_seed_list()
        assert jobs[0].tag == f"asymmetric_paaemd_s{paaemd[0]}"

    def test_scenario_filter(self):
        """Test planning a single scenario."""
        config = ExperimentConfig(report_algorithms=["li"])
        assert [j.scenario for j in plan_jobs(config, ("symmetric",))] == ["symmetric"]


class TestMerge:
    """Test final values, means and ordering checks."""

    def test_final_rows_keep_last_checkpoint(self):
        """Test that only the last iteration of each run is kept."""
        rows = [_row("symmetric", "li", 0.5, iteration=5), _row("symmetric", "li", 0.2, iteration=10)]
        assert final_rows(rows) == [rows[1]]

    def test_asserted_ordering_failure(self):
        """Test that only asymmetric orderings decide the outcome."""
        rows = [
            _row("asymmetric", "paoi", 0.3),
            _row("asymmetric", "froi", 0.2),
            _row("asymmetric", "li", 0.25),
            _row("symmetric", "paoi", 0.1),
            _row("symmetric", "froi", 0.2),
        ]
        summary = merge_reports(rows, delta=0.0)
        by_claim = {(c["scenario"], c["claim"]): c for c in summary["checks"]}
        assert by_claim[("asymmetric", "eps: paoi >= froi - 0")]["holds"]
        assert not by_claim[("asymmetric", "eps: froi >= li - 0")]["holds"]
        assert not by_claim[("asymmetric", "eps1: froi >= li - 0")]["holds"]
        assert not by_claim[("symmetric", "eps: paoi >= froi - 0")]["asserted"]
        assert summary["delta_source"] == "configured"
        assert summary["ok"] is False

    def test_each_player_is_checked(self):
        """Test that a player-2 inversion fails even when the averages are ordered."""
        rows = [
            _row("asymmetric", "paoi", 0.3, eps1=0.5, eps2=0.1),
            _row("asymmetric", "froi", 0.2, eps1=0.2, eps2=0.2),
        ]
        summary = merge_reports(rows, delta=0.0)
        holds = {c["metric"]: c["holds"] for c in summary["checks"]}
        assert holds == {"eps": True, "eps1": True, "eps2": False}
        assert summary["components"]["asymmetric"]["paoi"] == {"eps": 0.3, "eps1": 0.5, "eps2": 0.1}
        assert summary["ok"] is False

    def test_delta_and_seed_means(self):
        """Test seed averaging and a configured slack."""
        rows = [
            _row("asymmetric", "paaemd", 0.1, seed=1),
            _row("asymmetric", "paaemd", 0.3, seed=2),
            _row("asymmetric", "paoi", 0.25),
        ]
        summary = merge_reports(rows, delta=0.1)
        assert summary["means"]["asymmetric"]["paaemd"] == pytest.approx(0.2)
        assert summary["delta"] == {"asymmetric": 0.1}
        assert summary["ok"] is True
        unslacked = merge_reports(rows)
        assert unslacked["delta"] == {"asymmetric": 0.0}
        assert not unslacked["ok"]


class TestEstimatedDelta:
    """Test the slack taken from lossless runs."""

    def test_largest_lossless_component(self):
        """Test that the slack is the worst lossless metric per scenario."""
        finals = [
            _row("asymmetric", "li", 0.05, eps1=0.07, eps2=0.03),
            _row("asymmetric", "paoi", 0.9),
            _row("symmetric", "none", 0.01, eps1=-0.02, eps2=0.04),
            _row("symmetric", "li", 0.02),
        ]
        assert estimate_delta(finals) == {
            "asymmetric": pytest.approx(0.07),
            "symmetric": pytest.approx(0.04),
        }

    def test_estimate_absorbs_solver_error(self):
        """Test that a FROI run within the lossless error of LI passes."""
        rows = [
            _row("asymmetric", "froi", 0.030, eps1=0.028, eps2=0.032),
            _row("asymmetric", "li", 0.035, eps1=0.030, eps2=0.040),
        ]
        summary = merge_reports(rows)
        assert summary["delta_source"] == "estimated"
        assert summary["delta"]["asymmetric"] == pytest.approx(0.040)
        assert summary["ok"] is True
        assert not merge_reports(rows, delta=0.0)["ok"]

    def test_no_lossless_run(self):
        """Test that scenarios without a lossless run get no slack."""
        summary = merge_reports([_row("asymmetric", "paoi", 0.2), _row("asymmetric", "froi", 0.3)])
        assert summary["delta"] == {"asymmetric": 0.0}
        assert summary["ok"] is False


class TestWriteComparison:
    """Test the files written by the comparison."""

    @pytest.fixture
    def rows(self, tmp_path):
        write_curve_rows([_row("asymmetric", "froi", 0.4)], tmp_path / "curves" / "a.csv")
        write_curve_rows([_row("asymmetric", "li", 0.3)], tmp_path / "curves" / "b.csv")
        return collect_curve_rows(tmp_path)

    def test_write_comparison(self, tmp_path, rows):
        """Test report files built from curve files."""
        assert len(rows) == 2
        summary = write_comparison(tmp_path, rows)
        assert summary["ok"] is True
        assert (tmp_path / "report.csv").exists()
        saved = json.loads((tmp_path / "summary.json").read_text())
        assert saved["ok"] is True
        assert "created_at" not in saved
        assert "created_at" in json.loads(summary_meta_path(tmp_path / "summary.json").read_text())

    def test_summary_is_deterministic(self, tmp_path, rows):
        """Test that merging the same curves twice writes the same summary bytes."""
        write_comparison(tmp_path, rows)
        first = (tmp_path / "summary.json").read_bytes()
        write_comparison(tmp_path, list(reversed(rows)))
        assert (tmp_path / "summary.json").read_bytes() == first

    def test_curve_views(self, tmp_path, rows):
        """Test the seed-averaged table and the linear and log-log plots."""
        write_comparison(tmp_path, rows)
        lines = (tmp_path / "report_mean.csv").read_text().splitlines()
        assert lines[0] == "scenario,algorithm,iteration,eps_milliante,log10_iteration,log10_eps_milliante"
        assert lines[1] == "asymmetric,froi,10,400.000000,1.000000,2.602060"
        for name in ("asymmetric.svg", "asymmetric_log.svg"):
            assert (tmp_path / "plots" / name).read_text().lstrip().startswith("<?xml")


class TestRunExperiment:
    """Test the async runner end to end on Leduc."""

    @pytest.mark.asyncio
    async def test_small_run(self, tmp_path):
        """Test that every job writes a curve and the summary covers every run."""
        config = ExperimentConfig(
            report_algorithms=["paoi", "li"],
            cfr=CFRConfig(iterations=5, checkpoint_every=0),
            value_iterations=200,
            jobs=2,
            out=tmp_path,
        )
        summary = await run_experiment(config, ("symmetric",))
        assert sorted(r["algorithm"] for r in summary["runs"]) == ["li", "paoi"]
        assert all(r["iteration"] == 5 for r in summary["runs"])
        assert len(list((tmp_path / "curves").glob("*.csv"))) == 2
        assert len(list((tmp_path / "values").glob("leduc_*.json"))) == 1
        assert summary["ok"] is True

    @pytest.mark.asyncio
    async def test_leduc_asymmetric_orderings(self, tmp_path):
        """Test every asserted ordering, per player, on a short Leduc run."""
        config = ExperimentConfig(
            cfr=CFRConfig(variant="plus", iterations=1000, checkpoint_every=0),
            report_seeds=2,
            value_iterations=1000,
            jobs=4,
            out=tmp_path,
        )
        summary = await run_experiment(config, ("asymmetric",))
        checks = [c for c in summary["checks"] if c["scenario"] == "asymmetric"]
        assert len(checks) == len(ORDERINGS) * len(METRICS)
        assert all(c["holds"] for c in checks), [c["claim"] for c in checks if not c["holds"]]
        components = summary["components"]["asymmetric"]
        slack = summary["delta"]["asymmetric"]
        for metric in METRICS:
            assert components["paoi"][metric] >= components["li"][metric] - slack
        assert summary["ok"] is True

    @pytest.mark.slow
    @pytest.mark.asyncio
    async def test_numeral211_orderings(self, tmp_path):
        """Test the asserted orderings on a short Numeral211 run."""
        config = ExperimentConfig(
            game="numeral211",
            cfr=CFRConfig(variant="plus", iterations=100, checkpoint_every=0),
            report_seeds=1,
            value_iterations=200,
            jobs=4,
            out=tmp_path,
        )
        summary = await run_experiment(config, ("asymmetric",))
        assert {r["algorithm"] for r in summary["runs"]} == {"ehs", "paaemd", "paoi", "froi", "li"}
        assert summary["ok"] is True
