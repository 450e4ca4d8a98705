"""
Experiment orchestration behind the command line.

Every command runs under a fresh run id, is timed and logged, and returns
either ``{"success": True, "data": ..., "metadata": ...}`` or the error dict
of the failure.
"""

import itertools
import time
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .checkpoint import checkpoint_digest, load_checkpoint
from .config import RunConfig, load_config
from .contrast import train
from .curvature_cache import CurvatureStore
from .data import Dataset, chrono_split, interval_partition, parse, synth_generate, write
from .errors import EXIT_OK, CheckpointMismatchError, ConfigError, SinError, exit_code_for
from .evaluation import DEFAULT_KS, RankReport, evaluate, select_split, write_report
from .logging_config import get_logger, log_command, log_command_result

logger = get_logger(__name__, {"component": "runner"})

ABLATION_VARIANTS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "zero": {"curvature": "zero"},
    "static": {"curvature": "static"},
    "no-reweigh": {"no_reweigh": True},
    "no-cocon": {"no_cocon": True},
    "no-kernel": {"no_kernel": True},
}

SWEEP_FIELDS = ("dim", "sample_ratio", "intervals")


class ExperimentRunner:
    """Runs train, evaluate, curvature, synth, ablation and sweep commands."""

    def __init__(self):
        self.logger = get_logger(__name__, {"component": "runner"})

    def _execute(self, command: str, params: Dict[str, Any], action: Callable[[str], Dict[str, Any]]) -> Dict[str, Any]:
        run_id = str(uuid.uuid4())
        start_time = time.time()
        log_command(self.logger, command, params, run_id)
        try:
            data = action(run_id)
            elapsed_ms = (time.time() - start_time) * 1000
            log_command_result(self.logger, command, elapsed_ms, True, run_id)
            return {
                "success": True,
                "data": data,
                "metadata": {"run_id": run_id, "command": command, "elapsed_ms": elapsed_ms, "exit_code": EXIT_OK}
            }
        except SinError as e:
            elapsed_ms = (time.time() - start_time) * 1000
            log_command_result(self.logger, command, elapsed_ms, False, run_id)
            self.logger.error(f"{command} failed: {e.message}", extra={"run_id": run_id, "code": e.code})
            result = e.to_dict()
            result["metadata"] = {"run_id": run_id, "command": command, "elapsed_ms": elapsed_ms,
                                  "exit_code": exit_code_for(e)}
            return result
        except Exception as e:
            elapsed_ms = (time.time() - start_time) * 1000
            log_command_result(self.logger, command, elapsed_ms, False, run_id)
            self.logger.error(
                f"{command} failed: {str(e)}",
                extra={"run_id": run_id, "command": command, "error": str(e)},
                exc_info=True
            )
            return {
                "success": False,
                "error": {
                    "code": "COMMAND_EXECUTION_ERROR",
                    "message": f"Failed to execute {command}: {str(e)}",
                    "details": {"command": command, "run_id": run_id}
                },
                "metadata": {"run_id": run_id, "command": command, "elapsed_ms": elapsed_ms,
                             "exit_code": exit_code_for(e)}
            }

    # commands

    def train(self, config: RunConfig) -> Dict[str, Any]:
        """Train on the training split of ``config.data``; writes the checkpoint and log."""
        def action(run_id: str) -> Dict[str, Any]:
            train_ds, _, _ = chrono_split(_load(config))
            return _train_run(config, train_ds, Path(config.output_dir), run_id)

        return self._execute("train", _params(config), action)

    def evaluate(
        self,
        config: RunConfig,
        checkpoint_path: str,
        ks: Sequence[int] = DEFAULT_KS,
        split: str = "test",
        dim: Optional[int] = None
    ) -> Dict[str, Any]:
        """Score a split with a trained checkpoint; writes report.csv and ranks.csv."""
        def action(run_id: str) -> Dict[str, Any]:
            checkpoint = load_checkpoint(checkpoint_path)
            trained_dim = checkpoint.model.dim
            if dim is not None and dim != trained_dim:
                raise CheckpointMismatchError(
                    f"Requested dim {dim} does not match checkpoint dim {trained_dim}",
                    details={"dim": dim, "checkpoint_dim": trained_dim}
                )
            ds = _load(config)
            if ds.feature_dim != checkpoint.model.feature_dim:
                raise CheckpointMismatchError(
                    f"Data has {ds.feature_dim} features, checkpoint expects {checkpoint.model.feature_dim}",
                    details={"feature_dim": ds.feature_dim, "checkpoint_feature_dim": checkpoint.model.feature_dim}
                )
            rollout, events = select_split(ds, split)
            store = CurvatureStore.from_config(checkpoint.config, directory=Path(config.output_dir) / "curvature")
            report = evaluate(checkpoint, events, ks, rollout=rollout, split=split, store=store)
            summary_path, ranks_path = write_report(report, config.output_dir)
            return {
                "summary": report.summary(),
                "report": str(summary_path),
                "ranks": str(ranks_path)
            }

        params = {**_params(config), "checkpoint": checkpoint_path, "ks": list(ks), "split": split}
        return self._execute("evaluate", params, action)

    def curvature(self, config: RunConfig) -> Dict[str, Any]:
        """Precompute and cache the Ricci vectors and observed curvatures of every training interval."""
        def action(run_id: str) -> Dict[str, Any]:
            train_ds, _, _ = chrono_split(_load(config))
            batches = interval_partition(train_ds, config.intervals)
            store = CurvatureStore.from_config(config, directory=Path(config.output_dir) / "curvature")
            records = store.warm(batches)
            rows = [
                {
                    "interval": record.interval,
                    "side": record.side,
                    "n_nodes": record.n_nodes,
                    "n_edges": record.n_edges,
                    "kappa_observed": record.kappa_observed,
                    "observed": record.observed,
                    "elapsed_ms": record.elapsed_ms,
                }
                for record in records
            ]
            metrics = store.get_performance_metrics()
            return {
                "entries": rows,
                "n_entries": len(rows),
                "cache_dir": str(store.directory),
                "total_compute_ms": metrics["total_compute_ms"],
                "cache": store.get_cache_stats()
            }

        return self._execute("curvature", _params(config), action)

    def synth(self, output: str, **params: Any) -> Dict[str, Any]:
        """Write a planted-cluster event log."""
        def action(run_id: str) -> Dict[str, Any]:
            ds = synth_generate(**params)
            path = write(ds, output)
            return {"path": str(path), "n_events": ds.n_events, "n_users": ds.n_users, "n_items": ds.n_items}

        return self._execute("synth", {"output": output, **params}, action)

    def ablation(
        self,
        config: RunConfig,
        variants: Sequence[str] = ("full", "zero", "static", "no-reweigh", "no-cocon", "no-kernel"),
        seeds: Sequence[int] = (0, 1, 2),
        ks: Sequence[int] = DEFAULT_KS
    ) -> Dict[str, Any]:
        """
        Train and test every variant over several seeds.

        Writes ``ablation.csv`` with the mean and standard deviation of test
        MRR and Recall@k per variant.
        """
        def action(run_id: str) -> Dict[str, Any]:
            unknown = [name for name in variants if name not in ABLATION_VARIANTS]
            if unknown:
                raise ConfigError(
                    f"Unknown ablation variants: {', '.join(unknown)}",
                    details={"unknown": unknown, "known": sorted(ABLATION_VARIANTS)}
                )
            ds = _load(config)
            train_ds, _, _ = chrono_split(ds)
            root = Path(config.output_dir) / "ablation"
            runs: List[Dict[str, Any]] = []
            for name in variants:
                for seed in seeds:
                    variant = config.model_copy(update={**ABLATION_VARIANTS[name], "seed": int(seed)})
                    run_dir = root / name / f"seed{seed}"
                    report, _ = _train_and_test(variant, ds, train_ds, run_dir, run_id, ks)
                    runs.append({"variant": name, "seed": int(seed), **_metrics(report)})
                    self.logger.info(
                        f"Ablation {name} seed {seed}: MRR {report.mrr:.4f}",
                        extra={"run_id": run_id, "variant": name, "seed": seed}
                    )

            table = summarize_ablation(pd.DataFrame(runs), variants)
            path = root / "ablation.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            table.to_csv(path, index=False, lineterminator="\n")
            return {"path": str(path), "runs": runs, "summary": table.to_dict(orient="records")}

        params = {**_params(config), "variants": list(variants), "seeds": list(seeds)}
        return self._execute("ablation", params, action)

    def sweep(
        self,
        config: RunConfig,
        grid: Mapping[str, Sequence[Any]],
        seeds: Sequence[int] = (0,),
        ks: Sequence[int] = DEFAULT_KS
    ) -> Dict[str, Any]:
        """
        Hyperparameter sensitivity over the product of ``grid`` values.

        Each setting is trained and tested per seed. ``sweep.csv`` holds the
        mean and standard deviation of test MRR and Recall@k per setting plus
        the mean time spent computing training-interval curvatures.
        """
        def action(run_id: str) -> Dict[str, Any]:
            unknown = [name for name in grid if name not in SWEEP_FIELDS]
            empty = [name for name, values in grid.items() if not len(values)]
            if unknown or empty or not grid:
                raise ConfigError(
                    "Sweep grid needs at least one value for each of: " + ", ".join(SWEEP_FIELDS),
                    details={"unknown": unknown, "empty": empty, "known": list(SWEEP_FIELDS)}
                )
            names = list(grid)
            settings = [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]
            # validate every setting before the first run starts
            configs = [load_config(None, {**config.model_dump(), **setting}) for setting in settings]

            ds = _load(config)
            train_ds, _, _ = chrono_split(ds)
            root = Path(config.output_dir) / "sweep"
            runs: List[Dict[str, Any]] = []
            for setting, base in zip(settings, configs):
                label = "_".join(f"{name}{value}" for name, value in setting.items())
                for seed in seeds:
                    run_config = base.model_copy(update={"seed": int(seed)})
                    report, curvature = _train_and_test(
                        run_config, ds, train_ds, root / label / f"seed{seed}", run_id, ks
                    )
                    runs.append({
                        "setting": label, **setting, "seed": int(seed), **_metrics(report),
                        "curvature_ms": curvature["total_compute_ms"],
                        "curvature_computations": curvature["computations"]
                    })
                    self.logger.info(
                        f"Sweep {label} seed {seed}: MRR {report.mrr:.4f}, "
                        f"curvature {curvature['total_compute_ms']:.1f} ms",
                        extra={"run_id": run_id, "setting": setting, "seed": seed}
                    )

            table = summarize_sweep(pd.DataFrame(runs), names)
            path = root / "sweep.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            table.to_csv(path, index=False, lineterminator="\n")
            return {"path": str(path), "runs": runs, "summary": table.to_dict(orient="records")}

        params = {**_params(config), "grid": {name: list(values) for name, values in grid.items()},
                  "seeds": list(seeds)}
        return self._execute("sweep", params, action)


def summarize_ablation(runs: pd.DataFrame, variants: Sequence[str]) -> pd.DataFrame:
    """Mean and sample standard deviation of every metric per variant, in ``variants`` order."""
    metrics = [column for column in runs.columns if column == "mrr" or column.startswith("recall@")]
    grouped = runs.groupby("variant", sort=False)[metrics]
    means = grouped.mean().add_suffix("_mean")
    stds = grouped.std(ddof=1).fillna(0.0).add_suffix("_std")
    table = pd.concat([means, stds], axis=1)
    ordered = [column for metric in metrics for column in (f"{metric}_mean", f"{metric}_std")]
    table = table[ordered].reindex([name for name in variants if name in table.index])
    table.insert(0, "n_seeds", runs.groupby("variant", sort=False).size())
    return table.reset_index().rename(columns={"index": "variant"})


def summarize_sweep(runs: pd.DataFrame, fields: Sequence[str]) -> pd.DataFrame:
    """Mean and sample standard deviation of every metric per setting, plus mean curvature time."""
    metrics = [column for column in runs.columns if column == "mrr" or column.startswith("recall@")]
    grouped = runs.groupby(list(fields), sort=False)
    means = grouped[metrics].mean().add_suffix("_mean")
    stds = grouped[metrics].std(ddof=1).fillna(0.0).add_suffix("_std")
    table = pd.concat([means, stds], axis=1)
    table = table[[column for metric in metrics for column in (f"{metric}_mean", f"{metric}_std")]]
    table["curvature_ms_mean"] = grouped["curvature_ms"].mean()
    table.insert(0, "n_seeds", grouped.size())
    return table.reset_index()


def _load(config: RunConfig) -> Dataset:
    if not config.data:
        raise ConfigError("No data file given", details={"field": "data"})
    return parse(config.data)


def _params(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(exclude_defaults=True)


def _train_run(
    config: RunConfig,
    train_ds: Dataset,
    output_dir: Path,
    run_id: str,
    store: Optional[CurvatureStore] = None
) -> Dict[str, Any]:
    result = train(train_ds, config, output_dir=output_dir, store=store, run_id=run_id)
    checkpoint_path = output_dir / "checkpoint.json"
    last = result.curvature_history[-1] if result.curvature_history else None
    return {
        "checkpoint": str(checkpoint_path),
        "digest": checkpoint_digest(checkpoint_path),
        "train_log": str(output_dir / "train_log.csv"),
        "epochs": config.epochs,
        "intervals": result.train_intervals,
        "initial_loss": result.epoch_losses[0] if result.epoch_losses else None,
        "final_loss": result.epoch_losses[-1] if result.epoch_losses else None,
        "kappa_u": last.kappa_u if last else result.table.kappa_u,
        "kappa_i": last.kappa_i if last else result.table.kappa_i
    }


def _train_and_test(
    config: RunConfig,
    ds: Dataset,
    train_ds: Dataset,
    run_dir: Path,
    run_id: str,
    ks: Sequence[int]
) -> Tuple[RankReport, Dict[str, Any]]:
    """Train one run, test it, and return its report with the training curvature metrics."""
    store = CurvatureStore.from_config(config, directory=run_dir / "curvature")
    trained = _train_run(config, train_ds, run_dir, run_id, store)
    curvature = store.get_performance_metrics()
    checkpoint = load_checkpoint(trained["checkpoint"])
    rollout, events = select_split(ds, "test")
    report = evaluate(checkpoint, events, ks, rollout=rollout, split="test", store=store)
    write_report(report, run_dir)
    return report, curvature


def _metrics(report: RankReport) -> Dict[str, Any]:
    return {key: value for key, value in report.summary().items() if key != "split"}
