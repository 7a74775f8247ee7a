"""
Experiment orchestration: accuracy, audit, flexibility sweeps, the ADMM
baseline sweep and timing. Each run writes CSV tables plus a report.json
manifest carrying the scenario digest and every seed, and builds its console
summary from the same tables it wrote, so re-reading the CSVs replays the
summary exactly.
"""
import io
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import orjson
import pandas as pd

from app.models.atdm import BlaParams
from app.models.scenario import ExperimentSpec, Scenario
from app.protocol.runner import run_protocol
from app.services.atdm import build_compact
from app.services.audit import (
    AttackHints,
    control_mapping_exposure,
    count_inference,
    empirical_attack,
    heatmap_triplets,
    masking_distance,
)
from app.services.base import BaseService
from app.services.dispatch import DispatchRun, DispatchService
from app.services.masking import build_blocks, generate_keys, mask, mask_insecure
from app.services.ppdc import PpdcService
from app.services.scenario import check_experiment, scenario_digest
from app.utils.exceptions import DispatchError, SolverError
from app.utils.logs import ErrorLogger
from app.views.reports import ReportBundle

MANIFEST = "report.json"
SCHEMES = ("full", "no_cet", "no_crt")


def _relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _with_band(p: BlaParams, hi: float, lo: float) -> BlaParams:
    return p.model_copy(update={"temp_hi": hi, "temp_lo": lo})


def _with_horizon(p: BlaParams, T: int) -> BlaParams:
    # gamma repeats cyclically when the new horizon is longer
    return BlaParams.model_validate({**p.model_dump(), "horizon": T, "gamma": np.resize(p.gamma, T).tolist()})


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", float_precision="round_trip")


# summary lines per kind, computed from the written tables only

def _summary_accuracy(t: dict[str, pd.DataFrame]) -> list[str]:
    objective = t["objective.csv"]
    nppcc = objective[objective["method"] == "nppcc"].iloc[0]
    ppcc = objective[objective["method"] == "ppcc"]
    lines = [f"NPPCC objective {nppcc['objective']:.6f}"]
    for _, row in ppcc.iterrows():
        lines.append(
            f"PPCC seed {int(row['masking_seed'])}: objective {row['objective']:.6f}, "
            f"relative difference {row['relative_difference']:.3e}, recovered feasible {bool(row['feasible'])}"
        )
    lines.append(f"max relative difference {ppcc['relative_difference'].max():.3e}")
    return lines


def _summary_audit(t: dict[str, pd.DataFrame]) -> list[str]:
    lines = [
        f"{row['scheme']} T={int(row['T'])} M={int(row['M'])}: "
        f"{int(row['equations'])} equations, {int(row['unknowns'])} unknowns, {row['verdict']}"
        for _, row in t["counts.csv"].iterrows()
    ]
    for scheme, group in t["attack.csv"].groupby("scheme", sort=False):
        lines.append(
            f"attack on {scheme}: best residual {group['residual'].min():.3e}, "
            f"R and S recovered within 1% in {int(group['success'].sum())} of {len(group)} attempts"
        )
        first = group.iloc[0]
        lines.append(
            f"row-space fit on {scheme}: R error {first['structured_r_error']:.3e}, "
            f"S error {first['structured_s_error']:.3e}, recovered {bool(first['structured_success'])}"
        )
    return lines


def _summary_cases(t: dict[str, pd.DataFrame]) -> list[str]:
    lines = []
    for tau, group in t["objective.csv"].groupby("tau_const", sort=False):
        costs = ", ".join(f"case {int(r['case'])}: {r['objective']:.4f}" for _, r in group.iterrows())
        lines.append(f"tau_const {tau:g}: {costs}")
    return lines


def _summary_band(t: dict[str, pd.DataFrame]) -> list[str]:
    return [f"band multiplier {r['multiplier']:g}: {r['objective']:.4f}" for _, r in t["objective.csv"].iterrows()]


def _summary_ppdc(t: dict[str, pd.DataFrame]) -> list[str]:
    objective = t["objective.csv"]
    lines = []
    for _, r in objective.iterrows():
        if r["method"] == "ppdc":
            lines.append(
                f"phi {r['phi']:g}: cost {r['objective']:.4f}, loss {r['loss_percent']:.4f}%, "
                f"{int(r['iterations'])} iterations, converged {bool(r['converged'])}"
            )
        else:
            lines.append(f"{r['method'].upper()} reference cost {r['objective']:.4f}")
    return lines


def _summary_timing(t: dict[str, pd.DataFrame]) -> list[str]:
    means = t["timing.csv"].groupby("method", sort=False)[["modeling_seconds", "solving_seconds", "total_seconds"]].mean()
    lines = [
        f"{method.upper()}: modeling {row['modeling_seconds']:.4f} s, solving {row['solving_seconds']:.4f} s, "
        f"total {row['total_seconds']:.4f} s"
        for method, row in means.iterrows()
    ]
    if {"ppcc", "nppcc"} <= set(means.index):
        lines.append(f"PPCC / NPPCC total time ratio {means.loc['ppcc', 'total_seconds'] / means.loc['nppcc', 'total_seconds']:.3f}")
    return lines


SUMMARIES: dict[str, Callable[[dict[str, pd.DataFrame]], list[str]]] = {
    "accuracy": _summary_accuracy,
    "audit": _summary_audit,
    "case_sweep": _summary_cases,
    "band_sweep": _summary_band,
    "ppdc_sweep": _summary_ppdc,
    "timing": _summary_timing,
}


def replay_summary(out_dir: Union[str, Path]) -> list[str]:
    """Rebuild the console summary of a finished run from its manifest and CSVs."""
    out_dir = Path(out_dir)
    manifest = orjson.loads((out_dir / MANIFEST).read_bytes())
    tables = {name: read_table(out_dir / name) for name in manifest["files"] if name.endswith(".csv")}
    return _header(manifest["scenario_digest"], manifest["seeds"]) + SUMMARIES[manifest["kind"]](tables)


def _header(digest: str, seeds: dict[str, int]) -> list[str]:
    return [f"scenario {digest[:12]}, seeds " + ", ".join(f"{k}={v}" for k, v in seeds.items())]


class ExperimentService(BaseService):
    """Runs one ExperimentSpec against a scenario and writes its report bundle."""

    def __init__(self, scenario: Scenario, out_dir: Union[str, Path], logger: Optional[ErrorLogger] = None):
        super().__init__(logger)
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.digest = scenario_digest(scenario)
        self.tables: dict[str, pd.DataFrame] = {}
        self.bundle: Optional[ReportBundle] = None

    def _write(self, name: str, frame: pd.DataFrame) -> None:
        buffer = io.StringIO()
        buffer.write(f"# scenario_digest={self.digest}\n")
        buffer.write(f"# seeds={orjson.dumps(self.bundle.seeds).decode()}\n")
        frame.to_csv(buffer, index=False)
        path = self.out_dir / name
        path.write_text(buffer.getvalue())
        self.bundle.files.append(path)
        if name.endswith(".csv"):
            self.tables[name] = read_table(path)

    def _flush_manifest(self) -> None:
        b = self.bundle
        manifest = {
            "kind": b.kind,
            "scenario_digest": b.scenario_digest,
            "seeds": b.seeds,
            "files": [p.name for p in b.files],
            "summary": b.summary,
            "failed": b.failed,
            "error": b.data.get("error"),
        }
        (self.out_dir / MANIFEST).write_bytes(orjson.dumps(manifest, option=orjson.OPT_INDENT_2))

    def run(self, e: ExperimentSpec, seed: Optional[int] = None) -> ReportBundle:
        """
        Run `e` and write its files. `seed` replaces the masking seed grid and
        the baseline noise seed. Errors from the kernels are caught: whatever
        tables were written stay, and the bundle is marked failed.
        """
        check_experiment(self.scenario, e)
        if seed is not None:
            e = e.model_copy(update={"masking_seeds": [seed], "ppdc": e.ppdc.model_copy(update={"seed": seed})})
        self.out_dir.mkdir(parents=True, exist_ok=True)
        seeds = {"scenario": self.scenario.seed, "solver": self.scenario.solver.seed}
        seeds.update({f"masking.{i}": s for i, s in enumerate(e.masking_seeds)})
        if e.kind == "ppdc_sweep":
            seeds["ppdc"] = e.ppdc.seed
        self.bundle = ReportBundle(kind=e.kind, scenario_digest=self.digest, seeds=seeds)
        self.tables = {}

        runners = {
            "accuracy": self._accuracy,
            "audit": self._audit,
            "case_sweep": self._case_sweep,
            "band_sweep": self._band_sweep,
            "ppdc_sweep": self._ppdc_sweep,
            "timing": self._timing,
        }
        try:
            runners[e.kind](e)
            self.bundle.summary = _header(self.digest, seeds) + SUMMARIES[e.kind](self.tables)
        except DispatchError as exc:
            self.bundle.failed = True
            self.bundle.data["error"] = {"code": exc.code, "message": exc.message}
            self.bundle.summary = _header(self.digest, seeds) + [f"FAILED {exc.code}: {exc.message}"]
            if self.logger:
                self.logger.exception("experiment failed", exc, kind=e.kind)
        self._flush_manifest()
        self.log_info("experiment finished", kind=e.kind, failed=self.bundle.failed, files=len(self.bundle.files))
        return self.bundle

    def _dispatch(self, scenario: Optional[Scenario] = None) -> DispatchService:
        return DispatchService(scenario or self.scenario, self.logger)

    @staticmethod
    def _require_optimal(run: DispatchRun, label: str) -> DispatchRun:
        if run.solution is None:
            raise SolverError(f"{label} dispatch ended with status {run.result.status.value}")
        return run

    def _accuracy(self, e: ExperimentSpec) -> None:
        service = self._dispatch()
        nppcc = self._require_optimal(service.run_plaintext(), "plaintext")
        rows = [{
            "method": "nppcc", "masking_seed": -1, "objective": nppcc.solution.objective,
            "c_grid": nppcc.solution.c_grid, "c_om": nppcc.solution.c_om,
            "relative_difference": 0.0, "feasible": True, "status": nppcc.result.status.value,
        }]
        masked_runs = {}
        for seed in e.masking_seeds:
            ppcc = self._require_optimal(service.run_masked(masking_seed=seed), "masked")
            masked_runs[seed] = ppcc
            rows.append({
                "method": "ppcc", "masking_seed": seed, "objective": ppcc.solution.objective,
                "c_grid": ppcc.solution.c_grid, "c_om": ppcc.solution.c_om,
                "relative_difference": _relative(ppcc.solution.objective, nppcc.solution.objective),
                "feasible": all(r.passed for r in ppcc.feasibility.values()),
                "status": ppcc.result.status.value,
            })
        self._write("objective.csv", pd.DataFrame(rows))

        first = masked_runs[e.masking_seeds[0]]
        for bla_id in self.scenario.bla_ids:
            self._write(f"dispatch_{bla_id}.csv", pd.DataFrame({
                "period": np.arange(1, self.scenario.horizon + 1),
                "u_nppcc": nppcc.solution.bla_control[bla_id],
                "u_ppcc": first.solution.bla_control[bla_id],
                "x_nppcc": nppcc.solution.bla_state[bla_id],
                "x_ppcc": first.recovered[bla_id],
            }))

        outcome = run_protocol(self.scenario, service.key_seeds(e.masking_seeds[0]), logger=self.logger)
        outcome.transcript.export(self.out_dir / "transcript.log")
        self.bundle.files.append(self.out_dir / "transcript.log")
        self.bundle.data["protocol_status"] = outcome.status

    def _audit(self, e: ExperimentSpec) -> None:
        rows = []
        orders = sorted({p.order for p in self.scenario.blas}) or [1]
        for T in dict.fromkeys([self.scenario.horizon, e.attack_horizon]):
            for M in orders:
                for scheme in SCHEMES:
                    r = count_inference(T, M, scheme, self.scenario.masking.duplication)
                    rows.append({
                        "scheme": r.scheme, "T": r.T, "M": r.M, "duplication": r.duplication,
                        "equations": r.equations, "unknowns": r.unknowns, "verdict": r.verdict,
                        "inventory_total": r.inventory_total,
                    })
        self._write("counts.csv", pd.DataFrame(rows))

        params = self.scenario.blas[0]
        seed = e.masking_seeds[0]
        small = build_compact(_with_horizon(params, e.attack_horizon))
        keys = generate_keys(small.horizon, seed, self.scenario.masking)
        hints = AttackHints(T=small.horizon, M=small.order, duplication=keys.duplication)
        attempts = []
        for scheme, masked, h in (
            ("full", mask(small, keys), hints),
            ("no_cet", mask_insecure(small, keys, "no_cet"), AttackHints(small.horizon, small.order, 1)),
        ):
            report = empirical_attack(masked, h, attempts=e.attack_attempts, seed=seed, truth=small)
            for i in range(report.attempts):
                attempts.append({
                    "scheme": scheme, "attempt": i, "residual": report.attempt_residuals[i],
                    "r_error": report.attempt_r_errors[i], "s_error": report.attempt_s_errors[i],
                    "success": report.attempt_successes[i], "iterations": report.attempt_iterations[i],
                    "masked_rank": report.masked_rank, "masked_rows": report.masked_rows,
                    "structured_r_error": report.structured_r_error,
                    "structured_s_error": report.structured_s_error,
                    "structured_success": report.structured_success,
                })
        self._write("attack.csv", pd.DataFrame(attempts))

        compact = build_compact(params)
        full_keys = generate_keys(compact.horizon, seed, self.scenario.masking)
        blocks = build_blocks(compact, full_keys)
        distance = masking_distance(blocks.G, mask(compact, full_keys).f2)
        for name, grid in (("G", distance.heatmap_original), ("VG", distance.heatmap_masked)):
            cells = heatmap_triplets(grid)
            self._write(f"heatmap_{params.id}_{name}.csv", pd.DataFrame({
                "row": cells[:, 0].astype(int), "col": cells[:, 1].astype(int), "value": cells[:, 2],
            }))
        exposure = control_mapping_exposure(compact, full_keys, seed)
        self.bundle.data["max_abs_correlation"] = distance.max_abs_correlation
        self.bundle.data["control_mapping_exposed"] = exposure.exposed

    def _solve_variant(self, blas: list[BlaParams]) -> tuple[float, str]:
        scenario = self.scenario.model_copy(update={"blas": blas})
        run = self._dispatch(scenario).run_plaintext([build_compact(p) for p in blas])
        objective = run.solution.objective if run.solution is not None else float("nan")
        return objective, run.result.status.value

    def _case_sweep(self, e: ExperimentSpec) -> None:
        rows = []
        for tau in e.tau_const:
            for case, flexible in enumerate(e.participation_cases(len(self.scenario.blas)), start=1):
                blas = [p if keep else _with_band(p, tau, tau) for p, keep in zip(self.scenario.blas, flexible)]
                objective, status = self._solve_variant(blas)
                rows.append({"tau_const": tau, "case": case, "objective": objective, "status": status})
        self._write("objective.csv", pd.DataFrame(rows))

    def _band_sweep(self, e: ExperimentSpec) -> None:
        targets = set(e.band_targets or self.scenario.bla_ids)
        centers = {p.id: e.tau_center.get(p.id, (p.temp_hi + p.temp_lo) / 2.0) for p in self.scenario.blas}
        rows = []
        for multiplier in e.band_multiplier:
            half = multiplier * e.delta_tau
            blas = [
                _with_band(p, centers[p.id] + half, centers[p.id] - half) if p.id in targets else p
                for p in self.scenario.blas
            ]
            objective, status = self._solve_variant(blas)
            rows.append({"multiplier": multiplier, "objective": objective, "status": status})
        self._write("objective.csv", pd.DataFrame(rows))

    def _ppdc_sweep(self, e: ExperimentSpec) -> None:
        service = self._dispatch()
        nppcc = self._require_optimal(service.run_plaintext(), "plaintext")
        ppcc = self._require_optimal(service.run_masked(masking_seed=e.masking_seeds[0]), "masked")
        baseline = PpdcService(self.scenario, self.logger)
        rows = [
            {"method": "nppcc", "phi": float("nan"), "objective": nppcc.solution.objective,
             "loss_percent": 0.0, "iterations": 0, "converged": True, "diverged": False},
            {"method": "ppcc", "phi": float("nan"), "objective": ppcc.solution.objective,
             "loss_percent": 0.0, "iterations": 0, "converged": True, "diverged": False},
        ]
        trace = []
        for phi in e.phi:
            result = baseline.run(
                e.ppdc.model_copy(update={"phi": phi}), reference=nppcc, reference_cost=ppcc.solution.objective,
            )
            rows.append({
                "method": "ppdc", "phi": phi, "objective": result.cost, "loss_percent": result.loss_percent,
                "iterations": result.iterations, "converged": result.converged, "diverged": result.diverged,
            })
            trace += [
                {"phi": phi, "iteration": i, "primal_residual": p, "dual_residual": d}
                for i, (p, d) in enumerate(zip(result.primal_residuals, result.dual_residuals), start=1)
            ]
        self._write("objective.csv", pd.DataFrame(rows))
        self._write("ppdc_trace.csv", pd.DataFrame(trace))

    def _timing(self, e: ExperimentSpec) -> None:
        service = self._dispatch()
        rows = []
        for repeat in range(e.repeats):
            for method, run in (
                ("nppcc", lambda: service.run_plaintext()),
                ("ppcc", lambda: service.run_masked(masking_seed=e.masking_seeds[repeat % len(e.masking_seeds)])),
            ):
                result = self._require_optimal(run(), method)
                rows.append({
                    "method": method, "repeat": repeat, "modeling_seconds": result.modeling_seconds,
                    "solving_seconds": result.solving_seconds,
                    "total_seconds": result.modeling_seconds + result.solving_seconds,
                })
        self._write("timing.csv", pd.DataFrame(rows))


def run_experiment(
    s: Scenario,
    e: ExperimentSpec,
    out_dir: Union[str, Path],
    seed: Optional[int] = None,
    logger: Optional[ErrorLogger] = None,
) -> ReportBundle:
    return ExperimentService(s, out_dir, logger).run(e, seed)
