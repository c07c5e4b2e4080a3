"""
Experiment orchestration.

ExperimentRunner turns a RunConfig into solver, detection, harmonic and core
runs and writes every artifact into the configured output directory. It
delegates to:
- solver: minimize_full and initial_director
- vortex: locate_defects on the vertical average
- energy: breakdowns and the inequality checks
- harmonic / core: the renormalized-energy and core-constant predictions
- serializer: field dumps, CSV tables and JSON reports
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from slabvortex.config import ConfigError, RunConfig
from slabvortex.constants import EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_SUBRUN_FAILED
from slabvortex.core import ResolutionError, core_constant, core_table
from slabvortex.domain import BoundaryDatum, Domain2D, Grid3D, extrude, make_domain, power_law_datum
from slabvortex.energy import check_average_bound, check_gl_bound, energy_full, jensen_gap, vertical_average
from slabvortex.fields import DirectorField
from slabvortex.harmonic import (
    IncompatibleDataError,
    InvalidConfigurationError,
    minimize_renormalized,
    renormalized_energy,
    scan_renormalized,
)
from slabvortex.models import DefectSet, ExperimentKind, SolveReport
from slabvortex.params import ScalingParams
from slabvortex.serializer import CorruptDumpError, FieldSerializer, ReportSerializer
from slabvortex.solver import DivergedError, NoProgressError, el_residual, initial_director, minimize_full
from slabvortex.vortex import locate_defects

logger = logging.getLogger(__name__)

ENERGY_COLUMNS = ["eps", "eta", "bulk_h", "bulk_v", "anchor", "total", "reduced", "iterations", "residual", "converged"]
DEFECT_COLUMNS = ["x", "y", "charge"]
SWEEP_COLUMNS = [
    "eps", "eta", "k", "total", "reduced", "defects", "charges",
    "converged", "residual", "iterations", "error",
]
CORE_COLUMNS = ["k", "sigma", "eps", "gamma_value", "tilde_gamma", "iterations", "residual"]


@dataclass(frozen=True)
class RunOutcome:
    """Result of one experiment: exit code, summary for the console, written files."""
    kind: ExperimentKind
    exit_code: int
    summary: dict
    artifacts: tuple[Path, ...] = ()
    messages: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def reduced_energy(total: float, degree: int, eps: float) -> float:
    """E(eps) = F_eps - |d| pi |log eps|."""
    return total - abs(degree) * math.pi * abs(math.log(eps))


def plateau(eps_values: list[float], reduced: list[float]) -> dict:
    """
    Last-two mean, relative spread and linear-fit intercept of E(eps), taken
    in order of decreasing eps.
    """
    if not reduced:
        return {"mean": None, "spread": None, "intercept": None}
    order = np.argsort(eps_values)[::-1]
    eps = np.asarray(eps_values, dtype=float)[order]
    values = np.asarray(reduced, dtype=float)[order]
    if values.size == 1:
        return {"mean": float(values[0]), "spread": math.inf, "intercept": None}
    mean = 0.5 * float(values[-1] + values[-2])
    spread = abs(float(values[-1] - values[-2])) / max(abs(mean), 1.0)
    intercept = float(np.polyfit(eps, values, 1)[-1])
    return {"mean": mean, "spread": spread, "intercept": intercept}


class ExperimentRunner:
    """
    Runs the experiment a configuration asks for.

    Usage:
        runner = ExperimentRunner(load_config(path))
        outcome = runner.run()
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self._domain: Optional[Domain2D] = None

    # --- Shared setup ---

    @property
    def domain(self) -> Domain2D:
        if self._domain is None:
            self._domain = make_domain(self.config.shape(), self.config.resolution)
        return self._domain

    @property
    def grid(self) -> Grid3D:
        return extrude(self.domain, self.config.n_layers)

    def datum(self, domain: Optional[Domain2D] = None) -> BoundaryDatum:
        boundary = self.config.section("boundary")
        g = power_law_datum(domain or self.domain, boundary["degree"], boundary["rotation"])
        return g.conjugate() if boundary["conjugate"] else g

    @property
    def degree(self) -> int:
        boundary = self.config.section("boundary")
        return -boundary["degree"] if boundary["conjugate"] else boundary["degree"]

    @property
    def rotation(self) -> float:
        boundary = self.config.section("boundary")
        return -boundary["rotation"] if boundary["conjugate"] else boundary["rotation"]

    def run(self, dump: Optional[Path] = None) -> RunOutcome:
        """Dispatch on the configured experiment kind."""
        kind = self.config.experiment
        logger.info("Running %s", self.config)
        if kind == ExperimentKind.MINIMIZE:
            return self.minimize()
        if kind == ExperimentKind.SWEEP:
            return self.sweep()
        if kind == ExperimentKind.RENORMALIZED:
            return self.renormalized()
        if kind == ExperimentKind.CORE:
            return self.core()
        return self.analyze(dump)

    # --- Single minimization ---

    def _solve(self, p: ScalingParams, seed: Optional[int] = None) -> tuple[DirectorField, SolveReport, str]:
        opts = self.config.solve_options(seed)
        grid = self.grid
        g = self.datum()
        init = initial_director(grid, g, noise=opts.init_noise, seed=opts.seed, split_radius=opts.split_radius)
        try:
            U, report = minimize_full(init, g, p, opts)
            status = "converged" if report.converged else "not-converged"
        except NoProgressError as e:
            if e.report is None or e.field is None:
                raise
            logger.warning("No progress: %s", e)
            U, report, status = e.field, e.report, "no-progress"
        return U, report, status

    def _write_solution(self, U: DirectorField, report: SolveReport, p: ScalingParams, directory: Path) -> dict:
        directory.mkdir(parents=True, exist_ok=True)
        config_hash = self.config.config_hash
        u = vertical_average(U)
        defects = locate_defects(u, self.config.core_threshold)
        breakdown = report.final_energy
        reduced = reduced_energy(breakdown.total, self.degree, p.eps)

        FieldSerializer.save(
            U, directory / "field.dump", p,
            degree=self.degree, rotation=self.rotation, config_hash=config_hash,
        )
        energy_row = breakdown.to_row(p)
        energy_row.update(
            reduced=reduced, iterations=report.iterations, residual=report.residual, converged=report.converged
        )
        ReportSerializer.write_csv(directory / "energy.csv", [energy_row], ENERGY_COLUMNS, config_hash, p)
        ReportSerializer.write_csv(directory / "defects.csv", defects.to_rows(), DEFECT_COLUMNS, config_hash, p)

        u3 = U.values[..., 2][np.repeat(self.domain.interior_mask[:, :, None], U.grid.n_layers, axis=2)]
        summary = {
            "config_hash": config_hash,
            "params": p.to_dict(),
            "degree": self.degree,
            "energy": breakdown.to_dict(),
            "reduced_energy": reduced,
            "solve": report.to_dict(),
            "defects": defects.to_dict(),
            "gl_bound": check_gl_bound(U, p, self.config.c_star).to_dict(),
            "average_bound": check_average_bound(U).to_dict(),
            "jensen_gap": jensen_gap(U),
            "u3_range": [float(u3.min()), float(u3.max())] if u3.size else None,
        }
        ReportSerializer.write_json(directory / "report.json", summary)
        summary["_defects"] = defects
        return summary

    def minimize(self) -> RunOutcome:
        """Single minimization; exit 2 when the solver stops early."""
        out = self.config.prepare_output()
        p = self.config.params_list()[0]
        try:
            U, report, status = self._solve(p)
        except DivergedError as e:
            return RunOutcome(ExperimentKind.MINIMIZE, EXIT_NOT_CONVERGED, {"error": str(e)}, (), (str(e),))
        summary = self._write_solution(U, report, p, out)
        defects: DefectSet = summary.pop("_defects")
        summary["status"] = status
        code = EXIT_OK if status == "converged" else EXIT_NOT_CONVERGED
        artifacts = tuple(out / name for name in ("field.dump", "energy.csv", "defects.csv", "report.json"))
        return RunOutcome(ExperimentKind.MINIMIZE, code, summary, artifacts, defects.warnings)

    # --- eps sweep ---

    def _sweep_entry(self, p: ScalingParams) -> dict:
        directory = self.config.output / f"eps_{p.eps:.6g}"
        U, report, status = self._solve(p)
        summary = self._write_solution(U, report, p, directory)
        defects: DefectSet = summary.pop("_defects")
        return {
            "eps": p.eps,
            "eta": p.eta,
            "k": p.k,
            "total": report.final_energy.total,
            "reduced": summary["reduced_energy"],
            "defects": len(defects),
            "charges": " ".join(f"{c:+d}" for c in defects.charges),
            "converged": status == "converged",
            "residual": report.residual,
            "iterations": report.iterations,
            "error": "",
        }

    def _safe_entry(self, p: ScalingParams) -> dict:
        try:
            return self._sweep_entry(p)
        except Exception as e:  # recorded in the table; the sweep goes on
            logger.error("Sweep entry eps=%g failed: %s", p.eps, e)
            return {"eps": p.eps, "eta": p.eta, "k": p.k, "converged": False, "error": f"{type(e).__name__}: {e}"}

    def reference(self) -> dict:
        """W_g at its optimum plus |d| gamma at the sweep's slope."""
        d = abs(self.degree)
        if d == 0:
            return {"w_star": 0.0, "gamma": None, "prediction": None, "positions": []}
        optimum = minimize_renormalized(
            self.domain, self.datum(), d, seeds=self.config.seeds, workers=self.config.threads
        )
        core = self.config.section("core")
        constant = core_constant(
            self.config.k,
            [tuple(e) for e in core["ladder"]],
            core["cells_per_eps"],
            self.config.solve_options(),
            self.config.threads,
            core["n_layers"],
        )
        return {
            "w_star": optimum.value,
            "positions": [list(p) for p in optimum.positions],
            "gamma": constant.gamma,
            "gamma_spread": constant.spread,
            "prediction": optimum.value + d * constant.gamma,
        }

    def sweep(self) -> RunOutcome:
        """Minimize along eps_list; exit 3 if an entry raised, 2 if one did not converge."""
        out = self.config.prepare_output()
        schedule = self.config.params_list()
        domain = self.domain
        logger.debug("Sweep grid: %d x %d nodes", *domain.node_shape)
        if self.config.threads > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                rows = list(pool.map(self._safe_entry, schedule))
        else:
            rows = [self._safe_entry(p) for p in schedule]

        good = [r for r in rows if not r["error"]]
        trend = plateau([r["eps"] for r in good], [r["reduced"] for r in good])
        summary = {
            "config_hash": self.config.config_hash,
            "k": self.config.k,
            "degree": self.degree,
            "rows": rows,
            "plateau": trend,
        }
        messages = [f"eps={r['eps']:g}: {r['error']}" for r in rows if r["error"]]
        if self.config.section("sweep")["reference"]:
            try:
                summary["reference"] = self.reference()
            except (IncompatibleDataError, InvalidConfigurationError, ResolutionError) as e:
                messages.append(f"reference skipped: {e}")
                summary["reference"] = None

        csv_path = ReportSerializer.write_csv(
            out / "sweep.csv", rows, SWEEP_COLUMNS, self.config.config_hash, k=self.config.k
        )
        json_path = ReportSerializer.write_json(out / "sweep.json", summary)

        if any(r["error"] for r in rows):
            code = EXIT_SUBRUN_FAILED
        elif not all(r["converged"] for r in rows):
            code = EXIT_NOT_CONVERGED
        else:
            code = EXIT_OK
        return RunOutcome(ExperimentKind.SWEEP, code, summary, (csv_path, json_path), tuple(messages))

    # --- Renormalized energy ---

    def renormalized(self) -> RunOutcome:
        """Evaluate configured defects, and optionally optimize and scan W_g."""
        out = self.config.prepare_output()
        section = self.config.section("renormalized")
        domain, g = self.domain, self.datum()
        config_hash = self.config.config_hash
        summary: dict = {"config_hash": config_hash, "degree": self.degree}
        artifacts = []
        try:
            defects = self.config.prescribed_defects()
            if len(defects):
                report = renormalized_energy(domain, defects, g, section["sigmas"], section["subsamples"])
                summary["evaluation"] = {"defects": defects.to_dict(), **report.to_dict()}
                artifacts.append(ReportSerializer.write_csv(
                    out / "defects.csv", defects.to_rows(), DEFECT_COLUMNS, config_hash
                ))
            if section["optimize"]:
                n = section["n_defects"] or abs(self.degree)
                optimum = minimize_renormalized(domain, g, n, seeds=self.config.seeds, workers=self.config.threads)
                summary["optimum"] = optimum.to_dict()
                artifacts.append(ReportSerializer.write_csv(
                    out / "optimum.csv", optimum.defects().to_rows(), DEFECT_COLUMNS, config_hash
                ))
            if section["scan"]:
                rows = scan_renormalized(domain, g, section["scan_points"])
                columns = ["a1x", "a1y", "W"] if abs(self.degree) == 1 else ["a1x", "a1y", "a2x", "a2y", "W"]
                artifacts.append(ReportSerializer.write_csv(out / "landscape.csv", rows, columns, config_hash))
                summary["landscape_points"] = len(rows)
        except (IncompatibleDataError, InvalidConfigurationError) as e:
            return RunOutcome(ExperimentKind.RENORMALIZED, EXIT_INVALID, {"error": str(e)}, tuple(artifacts), (str(e),))
        artifacts.append(ReportSerializer.write_json(out / "renormalized.json", summary))
        return RunOutcome(ExperimentKind.RENORMALIZED, EXIT_OK, summary, tuple(artifacts))

    # --- Core constant ---

    def core(self) -> RunOutcome:
        """Core-constant ladders for every configured k; exit 2 if a cell problem did not converge."""
        out = self.config.prepare_output()
        section = self.config.section("core")
        try:
            table = core_table(
                section["k_values"],
                [tuple(e) for e in section["ladder"]],
                section["cells_per_eps"],
                self.config.solve_options(),
                self.config.threads,
                section["n_layers"],
            )
        except ResolutionError as e:
            return RunOutcome(ExperimentKind.CORE, EXIT_INVALID, {"error": str(e)}, (), (str(e),))

        rows = [s.to_row() for constant in table for s in constant.samples]
        csv_path = ReportSerializer.write_csv(out / "core.csv", rows, CORE_COLUMNS, self.config.config_hash)
        summary = {"config_hash": self.config.config_hash, "constants": [c.to_dict() for c in table]}
        json_path = ReportSerializer.write_json(out / "core.json", summary)
        messages = tuple(f"k={c.k:g}: {w}" for c in table for w in c.warnings)
        solved = all(s.report.converged for c in table for s in c.samples)
        code = EXIT_OK if solved else EXIT_NOT_CONVERGED
        return RunOutcome(ExperimentKind.CORE, code, summary, (csv_path, json_path), messages)

    # --- Dump analysis ---

    def analyze(self, dump: Optional[Path] = None) -> RunOutcome:
        """Validate a field dump, recompute energies, bounds and defects."""
        section = self.config.section("analyze")
        path = Path(dump) if dump is not None else (Path(section["dump"]) if section["dump"] else None)
        if path is None:
            raise ConfigError("analyze: no field dump given")
        out = self.config.prepare_output()
        try:
            U, header = FieldSerializer.load(path)
        except CorruptDumpError as e:
            return RunOutcome(ExperimentKind.ANALYZE, EXIT_INVALID, {"error": str(e), "offset": e.offset}, (), (str(e),))
        except OSError as e:
            return RunOutcome(ExperimentKind.ANALYZE, EXIT_INVALID, {"error": str(e)}, (), (str(e),))

        tolerance = section["tolerance"]
        g = power_law_datum(U.grid.base, header.degree, header.rotation)
        norm_issues = U.norm_violations(tolerance)
        lateral_issues = U.lateral_violations(g, tolerance)
        summary: dict = {
            "dump": path.as_posix(),
            "config_hash": header.config_hash,
            "validation": {
                "unit_norm": [{"node": [i, j, k], "norm": n} for i, j, k, n in norm_issues],
                "lateral": [{"node": [i, j, k], "deviation": d} for i, j, k, d in lateral_issues],
            },
        }
        messages = [f"|U| = {n:.12g} at node ({i}, {j}, {k})" for i, j, k, n in norm_issues[:10]]
        messages += [f"lateral datum off by {d:.3g} at node ({i}, {j}, {k})" for i, j, k, d in lateral_issues[:10]]
        if norm_issues or lateral_issues:
            json_path = ReportSerializer.write_json(out / "analysis.json", summary)
            return RunOutcome(ExperimentKind.ANALYZE, EXIT_INVALID, summary, (json_path,), tuple(messages))

        p = header.params or self.config.params_list()[0]
        defects = locate_defects(vertical_average(U), self.config.core_threshold)
        summary.update(
            params=p.to_dict(),
            energy=energy_full(U, p).to_dict(),
            residual=el_residual(U, p),
            gl_bound=check_gl_bound(U, p, self.config.c_star).to_dict(),
            average_bound=check_average_bound(U).to_dict(),
            jensen_gap=jensen_gap(U),
            defects=defects.to_dict(),
        )
        json_path = ReportSerializer.write_json(out / "analysis.json", summary)
        return RunOutcome(ExperimentKind.ANALYZE, EXIT_OK, summary, (json_path,), defects.warnings)
