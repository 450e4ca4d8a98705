"""
sin-coevolve command line.

Subcommands train, evaluate, curvature, synth, ablation and sweep share the run
flags of RunConfig. A --config JSON file overrides the defaults and flags
given on the command line override the file.

Exit codes: 0 success, 1 usage, 2 data, 3 runtime.
"""

import sys
from typing import Any, Callable, Dict, List, Literal, Optional, get_args, get_origin

import click
from click.core import ParameterSource
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import RunConfig, load_config
from .errors import EXIT_OK, EXIT_USAGE, SinError, exit_code_for
from .evaluation import DEFAULT_KS
from .logging_config import get_logger
from .runner import ABLATION_VARIANTS, ExperimentRunner

logger = get_logger(__name__, {"component": "cli"})


class ExitCodeGroup(click.Group):
    """Group mapping usage errors to exit 1 and library errors to their exit codes."""

    def main(self, args: Optional[List[str]] = None, prog_name: Optional[str] = None,
             complete_var: Optional[str] = None, standalone_mode: bool = True, **extra: Any) -> Any:
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except SinError as e:
            click.echo(f"Error [{e.code}]: {e.message}", err=True)
            sys.exit(exit_code_for(e))
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


# run flags

def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _run_option(name: str) -> Callable:
    field = RunConfig.model_fields[name]
    annotation = field.annotation
    help_text = field.description or name
    if name == "output_dir":
        return click.option(_flag(name), name, type=str, default=None,
                            help=f"{help_text} [default: $SIN_COEVOLVE_OUTPUT_DIR or runs]")
    default = field.get_default(call_default_factory=True)
    if annotation is bool:
        return click.option(_flag(name), name, is_flag=True, default=default, help=help_text)
    if get_origin(annotation) is Literal:
        return click.option(_flag(name), name, type=click.Choice(list(get_args(annotation))),
                            default=default, show_default=True, help=help_text)
    if name == "data":
        return click.option(_flag(name), name, type=str, default=None, help=help_text)
    return click.option(_flag(name), name, type=annotation, default=default, show_default=True, help=help_text)


def run_options(fn: Callable) -> Callable:
    """Attach every RunConfig flag plus --config to a command."""
    for name in reversed(list(RunConfig.model_fields)):
        fn = _run_option(name)(fn)
    return click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None,
                        help="JSON config file overriding the defaults")(fn)


def build_config(config_file: Optional[str], values: Dict[str, Any]) -> RunConfig:
    """RunConfig from the file plus the flags actually given on the command line."""
    ctx = click.get_current_context()
    overrides = {
        name: values[name]
        for name in RunConfig.model_fields
        if name in values and ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE
    }
    return load_config(config_file, overrides)


def _int_list(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> List[int]:
    if value is None:
        return []
    try:
        numbers = [int(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")
    if not numbers or min(numbers) < 0 or (param.name == "ks" and min(numbers) < 1):
        raise click.BadParameter(f"expected positive integers, got {value!r}")
    return numbers


def _float_list(ctx: click.Context, param: click.Parameter, value: str) -> List[float]:
    try:
        numbers = [float(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")
    if not numbers:
        raise click.BadParameter(f"expected at least one number, got {value!r}")
    return numbers


def _finish(result: Dict[str, Any]) -> int:
    if result["success"]:
        return EXIT_OK
    error = result["error"]
    Console(stderr=True).print(f"[red]Error [{error['code']}]:[/red] {error['message']}")
    return int(result["metadata"]["exit_code"])


def _summary_table(title: str, rows: List[Dict[str, Any]]) -> Table:
    table = Table(title=title)
    columns = list(rows[0]) if rows else []
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*[f"{row[c]:.4f}" if isinstance(row[c], float) else str(row[c]) for c in columns])
    return table


def _kv_table(title: str, rows: Dict[str, Any]) -> Table:
    table = Table(title=title)
    table.add_column("Field")
    table.add_column("Value")
    for key, value in rows.items():
        table.add_row(str(key), f"{value:.6g}" if isinstance(value, float) else str(value))
    return table


@click.group(cls=ExitCodeGroup)
@click.version_option(__version__, prog_name="sin-coevolve")
def cli() -> None:
    """Co-evolving user/item embeddings on curvature-varying manifolds."""


@cli.command()
@run_options
@click.pass_context
def train(ctx: click.Context, config_file: Optional[str], **values: Any) -> None:
    """Train a model on the training split and write a checkpoint."""
    config = build_config(config_file, values)
    result = ExperimentRunner().train(config)
    if result["success"]:
        data = result["data"]
        Console().print(_kv_table("Training", {
            "checkpoint": data["checkpoint"],
            "digest": data["digest"],
            "intervals": data["intervals"],
            "epochs": data["epochs"],
            "initial loss": data["initial_loss"],
            "final loss": data["final_loss"],
            "kappa_u": data["kappa_u"],
            "kappa_i": data["kappa_i"],
        }))
    ctx.exit(_finish(result))


@cli.command()
@run_options
@click.option("--checkpoint", "checkpoint_path", required=True, type=str, help="Checkpoint written by train")
@click.option("--k", "ks", default=",".join(map(str, DEFAULT_KS)), show_default=True, callback=_int_list,
              help="Comma-separated Recall@k cut-offs")
@click.option("--split", type=click.Choice(["valid", "test"]), default="test", show_default=True,
              help="Split to score")
@click.pass_context
def evaluate(ctx: click.Context, config_file: Optional[str], checkpoint_path: str, ks: List[int],
             split: str, **values: Any) -> None:
    """Rank held-out interactions and report MRR and Recall@k."""
    config = build_config(config_file, values)
    dim = values["dim"] if ctx.get_parameter_source("dim") == ParameterSource.COMMANDLINE else None
    result = ExperimentRunner().evaluate(config, checkpoint_path, ks=ks, split=split, dim=dim)
    if result["success"]:
        summary = result["data"]["summary"]
        table = Table(title=f"Evaluation ({summary['split']})")
        for column in summary:
            table.add_column(column)
        table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in summary.values()])
        Console().print(table)
    ctx.exit(_finish(result))


@cli.command()
@run_options
@click.pass_context
def curvature(ctx: click.Context, config_file: Optional[str], **values: Any) -> None:
    """Compute and cache per-interval Ricci vectors and observed curvatures."""
    config = build_config(config_file, values)
    result = ExperimentRunner().curvature(config)
    if result["success"]:
        data = result["data"]
        table = Table(title=f"Curvature ({data['n_entries']} entries in {data['cache_dir']})")
        for column in ("interval", "side", "nodes", "edges", "kappa_o", "observed"):
            table.add_column(column)
        for row in data["entries"]:
            table.add_row(str(row["interval"]), row["side"], str(row["n_nodes"]), str(row["n_edges"]),
                          f"{row['kappa_observed']:.4f}", str(row["observed"]))
        console = Console()
        console.print(table)
        console.print(f"Total curvature compute time: {data['total_compute_ms']:.1f} ms")
    ctx.exit(_finish(result))


@cli.command()
@click.option("--output", required=True, type=str, help="Event-log path to write")
@click.option("--n-users", default=50, show_default=True, type=int)
@click.option("--n-items", default=50, show_default=True, type=int)
@click.option("--n-clusters", default=5, show_default=True, type=int)
@click.option("--n-events", default=5000, show_default=True, type=int)
@click.option("--noise", default=0.1, show_default=True, type=float)
@click.option("--n-features", default=0, show_default=True, type=int)
@click.option("--t-max", default=10000.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.pass_context
def synth(ctx: click.Context, output: str, **params: Any) -> None:
    """Write a planted-cluster synthetic interaction log."""
    result = ExperimentRunner().synth(output, **params)
    if result["success"]:
        Console().print(_kv_table("Synthetic data", result["data"]))
    ctx.exit(_finish(result))


@cli.command()
@run_options
@click.option("--variants", default=",".join(ABLATION_VARIANTS), show_default=True,
              help="Comma-separated variants")
@click.option("--seeds", default="0,1,2", show_default=True, callback=_int_list, help="Comma-separated seeds")
@click.option("--k", "ks", default=",".join(map(str, DEFAULT_KS)), show_default=True, callback=_int_list,
              help="Comma-separated Recall@k cut-offs")
@click.pass_context
def ablation(ctx: click.Context, config_file: Optional[str], variants: str, seeds: List[int],
             ks: List[int], **values: Any) -> None:
    """Train and test model variants over several seeds; report mean and std."""
    config = build_config(config_file, values)
    names = [name.strip() for name in variants.split(",") if name.strip()]
    result = ExperimentRunner().ablation(config, names, seeds, ks)
    if result["success"]:
        Console().print(_summary_table("Ablation (test split)", result["data"]["summary"]))
    ctx.exit(_finish(result))


@cli.command()
@run_options
@click.option("--dims", default="32,64,128,256", show_default=True, callback=_int_list,
              help="Comma-separated embedding dimensions")
@click.option("--sample-ratios", default="0.2", show_default=True, callback=_float_list,
              help="Comma-separated curvature sampling ratios")
@click.option("--interval-counts", default=None, callback=_int_list,
              help="Comma-separated interval counts [default: the run's --intervals only]")
@click.option("--seeds", default="0", show_default=True, callback=_int_list, help="Comma-separated seeds")
@click.option("--k", "ks", default=",".join(map(str, DEFAULT_KS)), show_default=True, callback=_int_list,
              help="Comma-separated Recall@k cut-offs")
@click.pass_context
def sweep(ctx: click.Context, config_file: Optional[str], dims: List[int], sample_ratios: List[float],
          interval_counts: List[int], seeds: List[int], ks: List[int], **values: Any) -> None:
    """Hyperparameter sensitivity: test MRR, Recall@k and curvature time per setting."""
    config = build_config(config_file, values)
    grid: Dict[str, List[Any]] = {"dim": dims, "sample_ratio": sample_ratios}
    if interval_counts:
        grid["intervals"] = interval_counts
    result = ExperimentRunner().sweep(config, grid, seeds, ks)
    if result["success"]:
        Console().print(_summary_table("Sweep (test split)", result["data"]["summary"]))
    ctx.exit(_finish(result))


def main() -> None:
    """Console-script entry point."""
    cli()


if __name__ == "__main__":
    main()
