"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .backend import thread_count
from .config import ConfigError, ProblemConfig, load_config
from .effective import CFLError, EffectiveModelError
from .experiment import SOLVERS, _jsonable, derived_quantities, run_experiment, write_coefficients
from .presets import GROUPS, PRESETS, get_preset

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def resolve_config(source: str) -> ProblemConfig:
    """A YAML path, or the name of a single preset."""
    p = Path(source)
    if p.exists():
        return load_config(p)
    if source in PRESETS:
        return PRESETS[source].config
    raise ConfigError(f"{source!r} is neither a config file nor a preset name")


def _echo_json(obj) -> None:
    click.echo(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


@click.group()
@click.version_option(package_name="tmhomog")
def cli():
    """Waves across time-modulated interface lattices."""


@cli.command()
@click.argument("config")
def validate(config):
    """Check a configuration and print derived quantities."""
    cfg = resolve_config(config)
    _echo_json({"name": cfg.name, **derived_quantities(cfg)})


@cli.command()
@click.argument("config")
@click.option("-o", "--output", type=click.Path(), required=True, help="CSV file for the coefficient table.")
@click.option("--samples", default=256, show_default=True, help="Time samples per modulation period.")
def coefficients(config, output, samples):
    """Tabulate effective coefficients over one period."""
    cfg = resolve_config(config)
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    ident = write_coefficients(cfg, out, samples)
    res_path = out.with_name(out.stem + "_identities.csv")
    np.savetxt(res_path, ident, delimiter=",", header="r1,r2,r3,r4,r5", comments="")
    click.echo(f"max identity residual {np.max(np.abs(ident)):.3e}; wrote {out} and {res_path}")


@cli.command()
@click.argument("config")
@click.option("-o", "--outdir", type=click.Path(), required=True)
@click.option("--solver", "solvers", multiple=True, type=click.Choice(SOLVERS), default=("leading",), show_default=True)
@click.option("--field-stride", default=4, show_default=True, help="Store every n-th full field (0: none).")
@click.option("--interface-energy/--bulk-energy", default=False, help="Include interface-stored energy in micro runs.")
def simulate(config, outdir, solvers, field_stride, interface_energy):
    """Run one or more solvers."""
    cfg = resolve_config(config)
    s = run_experiment(cfg, outdir, tuple(solvers), field_stride=field_stride, interface_energy=interface_energy)
    _echo_json(s["results"])


@cli.command()
@click.argument("config")
@click.option("-o", "--outdir", type=click.Path(), required=True)
@click.option("--n-f", default=32, show_default=True, help="Retained Fourier harmonics.")
@click.option("--n-omega", default=400, show_default=True, help="Bloch frequencies across the zone.")
def dispersion(config, outdir, n_f, n_omega):
    """Branches and wavenumber gaps of the leading-order model."""
    cfg = resolve_config(config)
    s = run_experiment(cfg, outdir, ("dispersion",), n_f=n_f, n_omega=n_omega)
    _echo_json(s["results"]["dispersion"])


@cli.command()
@click.argument("config")
@click.option("-o", "--outdir", type=click.Path(), required=True)
@click.option("--with", "others", multiple=True, type=click.Choice(SOLVERS[1:]), default=("leading",),
              show_default=True, help="Effective solvers compared against the full-field run.")
@click.option("--interface-energy/--bulk-energy", default=True)
def compare(config, outdir, others, interface_energy):
    """Full-field run against effective models: field errors and energy mismatch."""
    cfg = resolve_config(config)
    s = run_experiment(cfg, outdir, ("micro", *others, "compare"), interface_energy=interface_energy)
    _echo_json(s["results"]["compare"])


def _sweep_one(args):
    path, outdir, solvers = args
    cfg = load_config(path)
    s = run_experiment(cfg, outdir, solvers)
    return path, s["results"]


@cli.command()
@click.argument("configs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--outdir", type=click.Path(), required=True)
@click.option("--solver", "solvers", multiple=True, type=click.Choice(SOLVERS), default=("leading",), show_default=True)
def sweep(configs, outdir, solvers):
    """Run several configurations in parallel (worker count from TMHOMOG_THREADS)."""
    for c in configs:
        load_config(c)  # fail fast on a bad file
    root = Path(outdir)
    jobs = [(c, str(root / Path(c).stem), tuple(solvers)) for c in configs]
    if len({j[1] for j in jobs}) != len(jobs):
        raise ConfigError("config file names must be unique within a sweep")
    n = min(thread_count(), len(jobs))
    if n == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(_sweep_one, jobs))
    _echo_json(dict(results))


@cli.command()
@click.argument("name", required=False)
@click.option("-o", "--outdir", type=click.Path())
@click.option("--list", "list_", is_flag=True, help="List presets and exit.")
def preset(name, outdir, list_):
    """Run a named experiment (or group) into OUTDIR/<preset>."""
    if list_ or name is None:
        for k in sorted(PRESETS):
            p = PRESETS[k]
            click.echo(f"{k:12s} {'+'.join(p.pipeline)}")
        for g, members in GROUPS.items():
            click.echo(f"{g:12s} group: {', '.join(members)}")
        return
    if outdir is None:
        raise click.UsageError("--outdir is required to run a preset")
    summaries = {}
    for p in get_preset(name):
        opts = dict(p.notes)
        s = run_experiment(p.config, Path(outdir) / p.name, p.pipeline, **opts)
        summaries[p.name] = {"derived": s["derived"], "results": s["results"]}
    _echo_json(summaries)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_RUNTIME
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except (ConfigError, CFLError, EffectiveModelError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        click.echo(f"runtime error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
