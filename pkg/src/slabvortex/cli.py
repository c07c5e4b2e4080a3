"""
Command-line interface for slabvortex
"""
from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape as rich_escape
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from slabvortex import __version__
from slabvortex.config import ConfigError, load_config
from slabvortex.constants import EXIT_INVALID, EXIT_NOT_CONVERGED
from slabvortex.experiments import ExperimentRunner, RunOutcome
from slabvortex.models import ExperimentKind
from slabvortex.params import InvalidParameterError
from slabvortex.solver import DivergedError, NoProgressError

# Results go to stdout, logs to stderr
console = Console()
error_console = Console(stderr=True)

logger = logging.getLogger("slabvortex")


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Route package logs through a RichHandler on stderr."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = RichHandler(console=error_console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def _fmt(value, digits: int = 8) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


def _status_style(code: int) -> str:
    return "green" if code == 0 else "yellow" if code == EXIT_NOT_CONVERGED else "red"


def print_minimize(summary: dict) -> None:
    """Energy breakdown and detected defects of a single run."""
    energy = summary["energy"]
    text = Text()
    text.append("Status:  ", style="bold")
    text.append(f"{summary['status']}\n", style="cyan")
    text.append("Params:  ", style="bold")
    text.append(f"eps={_fmt(summary['params']['eps'])} eta={_fmt(summary['params']['eta'])}\n")
    text.append("Energy:  ", style="bold")
    text.append(f"{_fmt(energy['total'])}", style="bold green")
    text.append(
        f"  (bulk_h {_fmt(energy['bulk_horizontal'], 6)}, bulk_v {_fmt(energy['bulk_vertical'], 6)}, "
        f"anchor {_fmt(energy['anchoring'], 6)})\n"
    )
    text.append("E(eps):  ", style="bold")
    text.append(f"{_fmt(summary['reduced_energy'])}\n")
    text.append("Solve:   ", style="bold")
    solve = summary["solve"]
    text.append(f"{solve['iterations']} iterations, residual {_fmt(solve['residual'], 3)}")
    console.print(Panel(text, title="[bold blue]Minimization[/]", border_style="blue"))

    defects = summary["defects"]["items"]
    if defects:
        table = Table(title="Detected defects", show_header=True, header_style="bold magenta")
        table.add_column("x", justify="right")
        table.add_column("y", justify="right")
        table.add_column("charge", justify="right", style="bold")
        for d in defects:
            table.add_row(_fmt(d["x"], 6), _fmt(d["y"], 6), f"{d['charge']:+d}")
        console.print(table)
    else:
        console.print("[dim]No defects detected.[/]")


def print_sweep(summary: dict) -> None:
    """Per-eps table, plateau and reference prediction."""
    table = Table(title=f"eps sweep (k={_fmt(summary['k'], 4)})", show_header=True, header_style="bold magenta")
    for column in ("eps", "F_eps", "E(eps)", "defects", "charges", "converged"):
        table.add_column(column, justify="right")
    for row in summary["rows"]:
        if row.get("error"):
            table.add_row(_fmt(row["eps"], 4), "[red]failed[/]", "", "", "", rich_escape(row["error"]))
            continue
        table.add_row(
            _fmt(row["eps"], 4), _fmt(row["total"]), _fmt(row["reduced"]),
            str(row["defects"]), row["charges"] or "-",
            "[green]yes[/]" if row["converged"] else "[yellow]no[/]",
        )
    console.print(table)

    trend = summary["plateau"]
    console.print(
        f"[bold]Plateau:[/] {_fmt(trend['mean'])}  spread {_fmt(trend['spread'], 3)}  "
        f"intercept {_fmt(trend['intercept'])}"
    )
    reference = summary.get("reference")
    if reference and reference.get("prediction") is not None:
        console.print(
            f"[bold]Prediction:[/] W* + d gamma = {_fmt(reference['w_star'])} + "
            f"{summary['degree']:d} x {_fmt(reference['gamma'])} = [bold green]{_fmt(reference['prediction'])}[/]"
        )


def print_renormalized(summary: dict) -> None:
    """Closed-form and limit values, optimum and landscape size."""
    evaluation = summary.get("evaluation")
    if evaluation:
        table = Table(title="Renormalized energy", show_header=True, header_style="bold magenta")
        table.add_column("quantity", style="dim")
        table.add_column("value", justify="right", style="bold")
        for key in ("w_closed", "w_limit", "discrepancy", "pair_term", "boundary_term", "regular_term"):
            table.add_row(key, _fmt(evaluation[key]))
        console.print(table)
    optimum = summary.get("optimum")
    if optimum:
        positions = ", ".join(f"({x:.5f}, {y:.5f})" for x, y in optimum["positions"])
        console.print(
            f"[bold]Optimum:[/] W = [bold green]{_fmt(optimum['value'])}[/] at {positions} "
            f"[dim](seed {optimum['seed']}, {optimum['evaluations']} evaluations)[/]"
        )
    if "landscape_points" in summary:
        console.print(f"[bold]Landscape:[/] {summary['landscape_points']} configurations")


def print_core(summary: dict) -> None:
    """gamma(k) table."""
    table = Table(title="Core constant", show_header=True, header_style="bold magenta")
    table.add_column("k", justify="right")
    table.add_column("gamma", justify="right", style="bold")
    table.add_column("spread", justify="right")
    table.add_column("samples", justify="right")
    for constant in summary["constants"]:
        spread = constant["spread"]
        table.add_row(
            _fmt(constant["k"], 4),
            _fmt(constant["gamma"]),
            "inf" if spread is None else f"{spread:.2%}",
            str(len(constant["samples"])),
        )
    console.print(table)


def print_analyze(summary: dict) -> None:
    """Validation verdict and recomputed quantities of a dump."""
    validation = summary.get("validation", {})
    issues = len(validation.get("unit_norm", [])) + len(validation.get("lateral", []))
    if issues:
        console.print(f"[bold red]Validation failed:[/] {issues} node(s)")
        return
    energy = summary["energy"]
    gl = summary["gl_bound"]
    text = Text()
    text.append("Energy:        ", style="bold")
    text.append(f"{_fmt(energy['total'])}\n", style="bold green")
    text.append("EL residual:   ", style="bold")
    text.append(f"{_fmt(summary['residual'], 3)}\n")
    text.append("GL bound:      ", style="bold")
    text.append(f"{'holds' if gl['holds'] else 'VIOLATED'} ({_fmt(gl['lhs'], 6)} <= {_fmt(gl['rhs'], 6)})\n")
    text.append("Average bound: ", style="bold")
    text.append("holds\n" if summary["average_bound"]["holds"] else "VIOLATED\n")
    text.append("Defects:       ", style="bold")
    text.append(str(len(summary["defects"]["items"])))
    console.print(Panel(text, title="[bold blue]Analysis[/]", border_style="blue"))


_PRINTERS = {
    ExperimentKind.MINIMIZE: print_minimize,
    ExperimentKind.SWEEP: print_sweep,
    ExperimentKind.RENORMALIZED: print_renormalized,
    ExperimentKind.CORE: print_core,
    ExperimentKind.ANALYZE: print_analyze,
}


def print_outcome(outcome: RunOutcome) -> None:
    if "error" not in outcome.summary:
        _PRINTERS[outcome.kind](outcome.summary)
    for message in outcome.messages:
        console.print(f"  [yellow]![/] {rich_escape(message)}")
    for path in outcome.artifacts:
        console.print(f"  [dim]•[/] [underline]{rich_escape(str(path))}[/]")
    style = _status_style(outcome.exit_code)
    console.print(f"[bold {style}]{outcome.kind.value}: exit {outcome.exit_code}[/]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slabvortex",
        description="Thin-slab director energy minimization and vortex analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=str, help="Output directory (overrides output)")
    common.add_argument("--seed", type=int, help="Random seed (overrides seeds and solve.seed)")
    common.add_argument("--threads", type=int, help="Worker threads (overrides threads)")
    common.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override a configuration key; may be repeated",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("minimize", parents=[common], help="Minimize the slab energy once")
    commands.add_parser("sweep", parents=[common], help="Minimize along an eps schedule")
    commands.add_parser("renormalized", parents=[common], help="Evaluate, optimize or scan W_g")
    commands.add_parser("core", parents=[common], help="Core-constant ladders")
    analyze = commands.add_parser("analyze", parents=[common], help="Validate and analyze a field dump")
    analyze.add_argument("dump", type=Path, nargs="?", help="Field dump (overrides analyze.dump)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    try:
        config = load_config(
            args.config,
            assignments=args.assignments,
            output=args.out,
            seed=args.seed,
            threads=args.threads,
            experiment=args.command,
        )
        outcome = ExperimentRunner(config).run(getattr(args, "dump", None))
    except ConfigError as e:
        error_console.print(f"[bold red]Configuration error:[/] {rich_escape(str(e))}")
        return EXIT_INVALID
    except InvalidParameterError as e:
        error_console.print(f"[bold red]Invalid parameters:[/] {rich_escape(str(e))}")
        return EXIT_INVALID
    except (DivergedError, NoProgressError) as e:
        error_console.print(f"[bold yellow]Solver stopped:[/] {rich_escape(str(e))}")
        return EXIT_NOT_CONVERGED

    print_outcome(outcome)
    return outcome.exit_code


if __name__ == "__main__":
    exit(main())
