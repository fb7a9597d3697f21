#!/usr/bin/env python3
"""
Command line of the framework.

    ./cli.py emr                       interactive EMR session (or --script FILE)
    ./cli.py dataset --patients 1000 --seed 7 --out instance/dataset.jsonl
    ./cli.py bench --workload crud --app-tom lpc --tom-tps ipc --cache on --out results.csv
    ./cli.py matrix --workload baseline --out results.csv

One EMR session per process: the session token lives as long as the process.
"""
import logging
import shlex
import sys

import click

import config
from app.bench import BenchmarkSpec, WORKLOADS, prepare_process, report, run_matrix, run_workload
from app.emr import load_dataset
from app.errors import AppSpearError
from app.framework import Deployment, DeploymentSettings
from app.transport.config import Boundary, CallMode, IsolationConfig

logger = logging.getLogger("appspear.cli")

_BOUNDARIES = click.Choice([b.value for b in Boundary])
_ON_OFF = click.Choice(["on", "off"])


def _configure_logging(level: str):
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                        datefmt='%Y-%m-%d %H:%M:%S')


@click.group()
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True, help="Python logging level.")
def cli(log_level):
    _configure_logging(log_level)


# EMR session

_HELP = """\
login <username>                  activate <role>       deactivate <role>
person create <name> [address]    person get <id>       person addr <id> [address]
person delete <id>
patient create <person-id> [diagnosis]                  patient get <id>
patient diag <id> [diagnosis]     patient export <id>   patient delete <id>
whoami    logout    help    quit"""


def _person(client, args):
    verb, rest = args[0], args[1:]
    if verb == "create":
        return client.create_person(rest[0], " ".join(rest[1:]))
    if verb == "get":
        return client.get_person(int(rest[0]))
    if verb == "addr":
        if len(rest) > 1:
            return client.set_address(int(rest[0]), " ".join(rest[1:]))
        return client.get_address(int(rest[0]))
    if verb == "delete":
        client.delete_person(int(rest[0]))
        return "deleted"
    raise click.UsageError(f"Unknown person verb {verb!r}")


def _patient(client, args):
    verb, rest = args[0], args[1:]
    if verb == "create":
        return client.create_patient(int(rest[0]), " ".join(rest[1:]))
    if verb == "get":
        return client.get_patient(int(rest[0]))
    if verb == "diag":
        if len(rest) > 1:
            return client.set_diagnosis(int(rest[0]), " ".join(rest[1:]))
        return client.get_diagnosis(int(rest[0]))
    if verb == "export":
        return client.export_patient(int(rest[0]))
    if verb == "delete":
        client.delete_patient(int(rest[0]))
        return "deleted"
    raise click.UsageError(f"Unknown patient verb {verb!r}")


def execute(client, line: str):
    """Run one EMR verb line against ``client``; returns what to print, or None."""
    words = shlex.split(line)
    if not words:
        return None
    verb, args = words[0].lower(), words[1:]
    if verb == "login":
        client.login(args[0])
        return f"logged in as {args[0]}"
    if verb == "activate":
        return f"epoch {client.activate(args[0])}"
    if verb == "deactivate":
        return f"epoch {client.deactivate(args[0])}"
    if verb == "logout":
        client.logout()
        return "logged out"
    if verb == "whoami":
        return client.whoami()
    if verb == "person":
        return _person(client, args)
    if verb == "patient":
        return _patient(client, args)
    if verb == "help":
        return _HELP
    raise click.UsageError(f"Unknown command {verb!r}; try 'help'")


def _prompt_lines():
    while True:
        try:
            yield click.prompt("emr", default="", show_default=False, prompt_suffix="> ")
        except (click.Abort, EOFError):
            return


def _isolation(variant, cache, call_mode, queue_depth=None):
    return IsolationConfig.parse(
        variant,
        call_mode=CallMode(call_mode),
        cache_enabled=cache == "on",
        queue_depth=config.QUEUE_DEPTH if queue_depth is None else queue_depth,
    ).validate()


@cli.command()
@click.option("--isolation", default=config.ISOLATION, show_default=True, help="Variant <app-tom>/<tom-tps>.")
@click.option("--cache", type=_ON_OFF, default="on" if config.CACHE_ENABLED else "off", show_default=True)
@click.option("--switchless", type=_ON_OFF, default="on" if config.CALL_MODE == "queued" else "off",
              show_default=True, help="Queued calls on TEE boundaries.")
@click.option("--script", type=click.File("r"), default=None, help="Run the verbs of a file instead of prompting.")
def emr(isolation, cache, switchless, script):
    """EMR session: login, activate, person/patient verbs, logout."""
    call_mode = CallMode.QUEUED.value if switchless == "on" else CallMode.SYNCHRONOUS.value
    try:
        deployment = Deployment.launch(_isolation(isolation, cache, call_mode), DeploymentSettings.from_config())
    except AppSpearError as e:
        raise click.ClickException(f"{e.code}: {e}")
    with deployment:
        client = deployment.client()
        lines = script if script is not None else _prompt_lines()
        for line in lines:
            if line.strip() in ("quit", "exit"):
                break
            try:
                result = execute(client, line)
            except AppSpearError as e:
                click.echo(f"error: {e.code}: {e}", err=True)
                continue
            except (IndexError, ValueError) as e:
                click.echo(f"error: bad arguments ({e}); try 'help'", err=True)
                continue
            except click.UsageError as e:
                click.echo(f"error: {e.message}", err=True)
                continue
            if result is not None:
                click.echo(result)


@cli.command()
@click.option("--patients", "n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=config.EMR_STORE_PATH, show_default=True)
def dataset(n, seed, out):
    """Generate a deterministic synthetic EMR dataset."""
    try:
        digest = load_dataset(out, n, seed)
    except AppSpearError as e:
        raise click.ClickException(f"{e.code}: {e}")
    click.echo(f"{n} patients written to {out} (sha256 {digest})")


def _bench_options(f):
    options = [
        click.option("--workload", type=click.Choice(WORKLOADS), default="baseline", show_default=True),
        click.option("--cache", type=_ON_OFF, default="on", show_default=True),
        click.option("--switchless", type=_ON_OFF, default="off", show_default=True),
        click.option("--iters", type=int, default=config.BENCH_ITERS, show_default=True),
        click.option("--warmup", type=int, default=config.BENCH_WARMUP, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Dataset store for the macro workload."),
        click.option("--out", type=click.Path(dir_okay=False), default="results.csv", show_default=True),
        click.option("--plot", is_flag=True, help="Also write plot data as JSON next to the CSV."),
        click.option("--cpu", type=int, default=None, help="CPU to pin the driver to."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@cli.command()
@click.option("--app-tom", type=_BOUNDARIES, default="lpc", show_default=True)
@click.option("--tom-tps", type=_BOUNDARIES, default="lpc", show_default=True)
@_bench_options
def bench(app_tom, tom_tps, workload, cache, switchless, iters, warmup, seed, dataset_path, out, plot, cpu):
    """Run one workload under one isolation variant."""
    call_mode = CallMode.QUEUED.value if switchless == "on" else CallMode.SYNCHRONOUS.value
    prepare_process(cpu)
    try:
        spec = BenchmarkSpec(workload, _isolation(f"{app_tom}/{tom_tps}", cache, call_mode), warmup, iters, seed=seed)
        results = run_workload(spec, DeploymentSettings.from_config(), dataset_path)
        path = report(results, out, plot)
    except AppSpearError as e:
        raise click.ClickException(f"{e.code}: {e}")
    for result in results:
        click.echo(f"{result.workload} {result.variant} {result.operation}: median {result.median_ns:.0f} ns "
                   f"[{result.ci_low_ns:.0f}, {result.ci_high_ns:.0f}]")
    click.echo(f"results written to {path}")


@cli.command()
@_bench_options
def matrix(workload, cache, switchless, iters, warmup, seed, dataset_path, out, plot, cpu):
    """Run one workload under every supported isolation variant."""
    prepare_process(cpu)
    try:
        results = run_matrix(
            workload,
            DeploymentSettings.from_config(),
            cache_enabled=cache == "on",
            call_mode=CallMode.QUEUED if switchless == "on" else CallMode.SYNCHRONOUS,
            warmup_iters=warmup,
            measure_iters=iters,
            seed=seed,
            dataset_path=dataset_path,
        )
        path = report(results, out, plot)
    except AppSpearError as e:
        raise click.ClickException(f"{e.code}: {e}")
    for result in results:
        click.echo(f"{result.workload} {result.variant:8} {result.operation:8} "
                   f"median {result.median_ns:10.0f} ns  overhead {result.overhead or 0:8.2f}x")
    click.echo(f"results written to {path}")


if __name__ == "__main__":
    sys.exit(cli())
