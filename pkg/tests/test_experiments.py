import orjson
import pytest

from app.models.scenario import ExperimentSpec, PpdcConfig
from app.services.experiments import MANIFEST, read_table, replay_summary, run_experiment
from app.utils.exceptions import ScenarioError


def manifest(out_dir):
    return orjson.loads((out_dir / MANIFEST).read_bytes())


def test_accuracy_report_replays(toy_scenario, tmp_path):
    bundle = run_experiment(toy_scenario, ExperimentSpec(kind="accuracy", masking_seeds=[1, 2]), tmp_path)
    assert not bundle.failed
    names = {p.name for p in bundle.files}
    assert {"objective.csv", "dispatch_BLA1.csv", "transcript.log"} <= names

    objective = read_table(tmp_path / "objective.csv")
    assert list(objective["method"]) == ["nppcc", "ppcc", "ppcc"]
    assert objective["relative_difference"].max() <= 1e-5
    assert objective["feasible"].all()
    assert bundle.data["protocol_status"] == "completed"

    assert replay_summary(tmp_path) == bundle.summary
    written = manifest(tmp_path)
    assert written["seeds"]["masking.1"] == 2
    assert written["scenario_digest"] == bundle.scenario_digest
    assert (tmp_path / "objective.csv").read_text().startswith(f"# scenario_digest={bundle.scenario_digest}")


def test_seed_override_replaces_the_masking_grid(toy_scenario, tmp_path):
    bundle = run_experiment(toy_scenario, ExperimentSpec(kind="accuracy", masking_seeds=[1, 2]), tmp_path, seed=9)
    assert bundle.seeds["masking.0"] == 9
    assert "masking.1" not in bundle.seeds


def test_audit_report(toy_scenario, tmp_path):
    bundle = run_experiment(toy_scenario, ExperimentSpec(kind="audit", attack_attempts=3), tmp_path)
    assert not bundle.failed
    counts = read_table(tmp_path / "counts.csv")
    assert set(counts["T"]) == {4, 8}
    assert set(counts["scheme"]) == {"full", "no_cet", "no_crt"}
    full = counts[(counts["scheme"] == "full") & (counts["T"] == 8)].iloc[0]
    assert full["verdict"] == "under_determined"
    attack = read_table(tmp_path / "attack.csv")
    assert len(attack) == 6
    assert not attack[attack["scheme"] == "full"]["success"].any()
    heatmap = read_table(tmp_path / "heatmap_BLA1_VG.csv")
    assert list(heatmap.columns) == ["row", "col", "value"]
    assert bundle.data["control_mapping_exposed"]
    assert replay_summary(tmp_path) == bundle.summary


def test_case_sweep_orders_costs(toy_scenario, tmp_path):
    spec = ExperimentSpec(kind="case_sweep", tau_const=[24.0], participation=[[True], [False]])
    run_experiment(toy_scenario, spec, tmp_path)
    objective = read_table(tmp_path / "objective.csv")
    flexible, pinned = objective["objective"]
    # a pinned band is a subset of the flexible one
    assert flexible <= pinned + 1e-6 * abs(pinned)


def test_default_cases_follow_the_bla_count(toy_scenario, tmp_path):
    run_experiment(toy_scenario, ExperimentSpec(kind="case_sweep", tau_const=[24.0]), tmp_path)
    objective = read_table(tmp_path / "objective.csv")
    assert list(objective["case"]) == [1, 2]


def test_band_sweep_costs_do_not_increase(toy_scenario, tmp_path):
    spec = ExperimentSpec(kind="band_sweep", tau_center={"BLA1": 25.0}, band_multiplier=[0.0, 1.0, 2.0])
    run_experiment(toy_scenario, spec, tmp_path)
    costs = list(read_table(tmp_path / "objective.csv")["objective"])
    assert all(later <= earlier + 1e-6 * abs(earlier) for earlier, later in zip(costs, costs[1:]))


def test_ppdc_sweep_writes_trace(toy_scenario, tmp_path):
    spec = ExperimentSpec(kind="ppdc_sweep", phi=[0.0], ppdc=PpdcConfig(max_iterations=5))
    bundle = run_experiment(toy_scenario, spec, tmp_path)
    assert not bundle.failed
    objective = read_table(tmp_path / "objective.csv")
    assert list(objective["method"]) == ["nppcc", "ppcc", "ppdc"]
    trace = read_table(tmp_path / "ppdc_trace.csv")
    assert len(trace) == int(objective["iterations"].iloc[2])
    assert bundle.seeds["ppdc"] == 0


def test_timing_rows(toy_scenario, tmp_path):
    run_experiment(toy_scenario, ExperimentSpec(kind="timing", repeats=2), tmp_path)
    timing = read_table(tmp_path / "timing.csv")
    assert list(timing["method"]) == ["nppcc", "ppcc", "nppcc", "ppcc"]
    assert (timing["total_seconds"] > 0).all()
    assert replay_summary(tmp_path)[-1].startswith("PPCC / NPPCC total time ratio")


def test_infeasible_grid_marks_the_bundle_failed(infeasible_scenario, tmp_path):
    bundle = run_experiment(infeasible_scenario, ExperimentSpec(kind="accuracy"), tmp_path)
    assert bundle.failed
    assert bundle.data["error"]["code"] == "SOLVER_ERROR"
    assert bundle.summary[-1].startswith("FAILED SOLVER_ERROR")
    written = manifest(tmp_path)
    assert written["failed"]
    assert written["error"]["code"] == "SOLVER_ERROR"


def test_mismatched_experiment_is_refused(toy_scenario, tmp_path):
    spec = ExperimentSpec(kind="case_sweep", participation=[[True, True, False]])
    with pytest.raises(ScenarioError):
        run_experiment(toy_scenario, spec, tmp_path)
    assert not (tmp_path / MANIFEST).exists()


@pytest.mark.slow
def test_bundled_masked_dispatch_matches_plaintext(bundled_scenario, tmp_path):
    bundle = run_experiment(bundled_scenario, ExperimentSpec(kind="accuracy"), tmp_path)
    assert not bundle.failed
    objective = read_table(tmp_path / "objective.csv")
    assert objective["relative_difference"].max() <= 1e-5
    assert objective["feasible"].all()


@pytest.mark.slow
def test_bundled_case_sweep_orders_the_four_cases(bundled_scenario, tmp_path):
    bundle = run_experiment(bundled_scenario, ExperimentSpec(kind="case_sweep"), tmp_path)
    assert not bundle.failed
    objective = read_table(tmp_path / "objective.csv")
    slack = 2 * bundled_scenario.solver.gap
    for tau, group in objective.groupby("tau_const"):
        costs = list(group.sort_values("case")["objective"])
        assert len(costs) == 4, tau
        assert all(a <= b + slack * abs(b) for a, b in zip(costs, costs[1:])), (tau, costs)


@pytest.mark.slow
def test_bundled_band_sweep_costs_do_not_increase(bundled_scenario, tmp_path):
    run_experiment(bundled_scenario, ExperimentSpec(kind="band_sweep"), tmp_path)
    costs = list(read_table(tmp_path / "objective.csv")["objective"])
    slack = 2 * bundled_scenario.solver.gap
    assert all(later <= earlier + slack * abs(earlier) for earlier, later in zip(costs, costs[1:])), costs


@pytest.mark.slow
def test_bundled_ppdc_loss_grows_with_phi(bundled_scenario, tmp_path):
    bundle = run_experiment(bundled_scenario, ExperimentSpec(kind="ppdc_sweep"), tmp_path)
    assert not bundle.failed
    objective = read_table(tmp_path / "objective.csv")
    ppdc = objective[objective["method"] == "ppdc"].sort_values("phi")
    losses = list(ppdc["loss_percent"])
    assert ppdc["converged"].all()
    assert losses[0] >= 0.0
    # loss in percent; allow the solver gap as noise
    slack = 2 * bundled_scenario.solver.gap * 100.0
    assert all(later >= earlier - slack for earlier, later in zip(losses, losses[1:])), losses


@pytest.mark.slow
def test_bundled_masked_overhead_stays_within_three_times(bundled_scenario, tmp_path):
    run_experiment(bundled_scenario, ExperimentSpec(kind="timing", repeats=3), tmp_path)
    timing = read_table(tmp_path / "timing.csv")
    means = timing.groupby("method")[["modeling_seconds", "total_seconds"]].mean()
    assert means.loc["ppcc", "modeling_seconds"] >= means.loc["nppcc", "modeling_seconds"]
    assert means.loc["ppcc", "total_seconds"] <= 3.0 * means.loc["nppcc", "total_seconds"]
