"""Command-line interface: generate, run, eval, plot."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agent import EpisodeTrace, run_episode
from .config import ConfigError, load_config
from .generator import GeneratorConfig, generate_scenario
from .metrics import SuiteReport, emit_plot, emit_report, score_episode
from .reasoner import EndpointConfig, ExternalReasoner, ScriptedReasoner
from .world import load_scenario, save_scenario


@click.group()
def cli():
    """Dual-scale aerial navigation simulator and agent toolkit."""


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", "-n", type=int, default=10, show_default=True)
@click.option("--difficulty", type=click.Choice(["easy", "medium", "hard"]),
              default="medium", show_default=True)
@click.option("--size", type=float, default=800.0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="scenarios",
              show_default=True)
def generate(seed, count, difficulty, size, out):
    """Write COUNT scenario files plus a manifest."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = GeneratorConfig(size=size, difficulty=difficulty)
    manifest = []
    for i in range(count):
        sc = generate_scenario(config, seed + i)
        path = out_dir / f"scenario-{seed + i:04d}.json"
        save_scenario(sc, path)
        manifest.append({"path": path.name, "seed": seed + i, "difficulty": difficulty})
    (out_dir / "manifest.json").write_text(
        json.dumps({"difficulty": difficulty, "base_seed": seed,
                    "scenarios": manifest}, indent=2, sort_keys=True))
    click.echo(f"wrote {count} scenarios to {out_dir}")


def _build_config(config_path, overrides):
    return load_config(path=config_path, overrides=overrides)


def _build_reasoner(cfg):
    if cfg.reasoner == "external":
        return ExternalReasoner(EndpointConfig(cfg.endpoint_url, cfg.endpoint_timeout,
                                               cfg.endpoint_retries))
    return ScriptedReasoner()


@cli.command()
@click.argument("scenarios", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", type=str, help="Comma-separated episode seeds.")
@click.option("--reasoner", type=click.Choice(["scripted", "external"]))
@click.option("--endpoint", "endpoint_url", type=str)
@click.option("--noiseless/--noisy", default=None)
@click.option("--ablate", type=click.Choice(["scm", "hsg", "staging"]), multiple=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)
def run(scenarios, config_path, seeds, reasoner, endpoint_url, noiseless, ablate, jobs, out):
    """Run episodes over SCENARIOS, writing trace files and a report."""
    overrides = {
        "reasoner": reasoner,
        "endpoint_url": endpoint_url,
        "noiseless": noiseless,
        "output_dir": out,
    }
    if seeds:
        overrides["seeds"] = tuple(int(s) for s in seeds.split(","))
    for name in ablate:
        overrides[f"ablate_{name}"] = True
    cfg = _build_config(config_path, overrides)
    engine = _build_reasoner(cfg)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    loaded = [load_scenario(p) for p in scenarios]

    report = SuiteReport(config_digest=cfg.digest())
    tasks = [(sc, seed) for sc in loaded for seed in cfg.seeds]

    def one(task):
        sc, seed = task
        trace = run_episode(sc, engine, cfg, episode_seed=seed)
        trace.save(out_dir / f"trace-{sc.seed:04d}-s{seed}.json")
        return score_episode(trace, sc)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            report.scores = list(pool.map(one, tasks))
    else:
        report.scores = [one(t) for t in tasks]

    emit_report(report, out_dir)
    agg = report.aggregates()
    click.echo(f"{agg['episodes']} episodes: SR {agg['sr']:.1%}, "
               f"mean NE {agg['ne_mean_m']:.2f} m, SPL {agg['spl_mean']:.3f}")


@cli.command("eval")
@click.argument("traces", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)
def eval_cmd(traces, out):
    """Re-score saved trace files and emit CSV/JSON reports."""
    report = SuiteReport(config_digest="")
    for path in traces:
        trace = EpisodeTrace.load(path)
        report.config_digest = report.config_digest or trace.config_digest
        report.scores.append(score_episode(trace))
    emit_report(report, out)
    agg = report.aggregates()
    click.echo(f"{agg['episodes']} traces: SR {agg['sr']:.1%}, "
               f"OSR {agg['osr']:.1%}, SPL {agg['spl_mean']:.3f}")


@cli.command()
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default="trace.svg",
              show_default=True)
def plot(trace, out):
    """Render a trace to a stage-colored SVG trajectory plot."""
    emit_plot(EpisodeTrace.load(trace), out)
    click.echo(f"wrote {out}")


def main(argv=None) -> int:
    """Entry point with documented exit codes: 0 ok, 1 usage, 2 runtime."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return 0 if exc.exit_code == 0 else 1
    except (click.UsageError, ConfigError) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except Exception as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
