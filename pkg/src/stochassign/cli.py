"""Batch command-line interface.

Subcommands: fit (grid search + trace), profile (objective along the
concentration lattice), heatmap (sphere projection of risk), bound
(welfare-risk bound for a supplied rule or a finite rule set), assign
(draw treatment assignments from a fitted rule), simulate (run one
synthetic benchmark experiment end to end) and fixture (emit a synthetic
schema-conformant dataset).

Exit codes: 0 ok, 2 input error, 3 numeric failure.  All randomness flows
from --seed; results are independent of --threads.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import __version__, dataio, gibbs, gridfit, simulate, vmf, welfare
from .policy import build_grid, normalize_direction, to_spherical
from .seeding import seed_chain

_ASSIGN_TAG = 3
_ASSIGN_PROPENSITY_TAG = 4


def _parse_vector(text: str) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise click.UsageError(f"cannot parse vector {text!r}: comma-separated floats expected") from exc
    return normalize_direction(values)


def _fit_config(params: dict) -> gridfit.FitConfig:
    return gridfit.FitConfig(
        sphere_points=params["grid_points"],
        kappa_max=params["kappa_max"],
        kappa_step=params["kappa_step"],
        draws=params["draws"],
        epsilon=params["epsilon"],
        seed=params["seed"],
    )


def _data_options(fn):
    for option in reversed(
        [
            click.option("--epsilon", type=float, default=0.05, show_default=True, help="confidence level of the bound"),
            click.option("--psi", type=float, default=None, help="overlap constant; default: largest valid value"),
            click.option("--propensity", type=float, default=None, help="constant assignment probability when the column is absent"),
            click.option("--cost", type=float, default=0.0, show_default=True, help="treatment cost subtracted from treated outcomes"),
            click.option("--seed", type=int, default=0, show_default=True, help="master seed"),
        ]
    ):
        fn = option(fn)
    return fn


def _grid_options(fn):
    for option in reversed(
        [
            click.option("--grid-points", type=int, default=10_116, show_default=True, help="sphere grid size"),
            click.option("--kappa-max", type=float, default=5.0, show_default=True),
            click.option("--kappa-step", type=float, default=0.01, show_default=True),
            click.option("--draws", type=int, default=1000, show_default=True, help="Monte-Carlo rule draws per grid cell"),
            click.option("--threads", type=int, default=0, show_default=True, help="worker processes (0 = CPU count); never changes results"),
        ]
    ):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def cli():
    """Learn stochastic treatment assignment rules from experimental data."""


@cli.command("fit")
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@_data_options
@_grid_options
@click.option("--output-json", type=click.Path(dir_okay=False), required=True)
@click.option("--trace-csv", type=click.Path(dir_okay=False), default=None, help="write the full grid trace")
def cmd_fit(data, epsilon, psi, propensity, cost, seed, grid_points, kappa_max, kappa_step, draws, threads, output_json, trace_csv):
    """Grid-search the bound minimiser on a dataset."""
    params = dict(
        epsilon=epsilon, psi=psi, propensity=propensity, cost=cost, seed=seed,
        grid_points=grid_points, kappa_max=kappa_max, kappa_step=kappa_step, draws=draws,
    )
    dataset = dataio.ingest(data, cost=cost, propensity=propensity, psi=psi)
    result = gridfit.fit(dataset.sample, dataset.meta, _fit_config(params), threads=threads)
    manifest = dataio.build_manifest("fit", params, input_path=data)
    payload = {"manifest": manifest, "result": result.to_dict()}
    props = welfare.individual_propensities(
        dataset.sample, result.mu, result.kappa, draws, seed_chain(seed, _ASSIGN_PROPENSITY_TAG)
    )
    payload["propensity_summary"] = welfare.propensity_summary(props)
    dataio.write_json(output_json, payload)
    if trace_csv is not None:
        trace = result.trace
        columns = {k: trace[k] for k in ("theta_deg", "phi_deg", "kappa", "objective", "risk", "kl") if k in trace}
        if "theta_deg" not in columns:
            columns = {"point_index": trace["point_index"], **columns}
        dataio.write_csv(trace_csv, columns, manifest=manifest)
    click.echo(f"kappa*={result.kappa:g} objective={result.objective:.6g} risk={result.risk:.6g}")


@cli.command("profile")
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--mu", required=True, help="mean direction as comma-separated components")
@_data_options
@_grid_options
@click.option("--output-csv", type=click.Path(dir_okay=False), required=True)
def cmd_profile(data, mu, epsilon, psi, propensity, cost, seed, grid_points, kappa_max, kappa_step, draws, threads, output_csv):
    """Objective and risk along the concentration lattice at fixed direction."""
    params = dict(
        epsilon=epsilon, psi=psi, propensity=propensity, cost=cost, seed=seed,
        grid_points=grid_points, kappa_max=kappa_max, kappa_step=kappa_step, draws=draws, mu=mu,
    )
    dataset = dataio.ingest(data, cost=cost, propensity=propensity, psi=psi)
    direction = _parse_vector(mu)
    rows = gridfit.kappa_profile(dataset.sample, dataset.meta, direction, _fit_config(params))
    manifest = dataio.build_manifest("profile", params, input_path=data)
    dataio.write_csv(output_csv, rows, manifest=manifest)
    best = int(np.argmin(rows["objective"]))
    click.echo(f"argmin kappa={rows['kappa'][best]:g} objective={rows['objective'][best]:.6g}")


@cli.command("heatmap")
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["deterministic", "posterior"]), default="deterministic", show_default=True)
@click.option("--kappa", type=float, default=None, help="concentration for posterior mode")
@_data_options
@_grid_options
@click.option("--output-csv", type=click.Path(dir_okay=False), required=True)
def cmd_heatmap(data, mode, kappa, epsilon, psi, propensity, cost, seed, grid_points, kappa_max, kappa_step, draws, threads, output_csv):
    """Welfare risk over the sphere (3-dimensional rules only)."""
    params = dict(
        epsilon=epsilon, psi=psi, propensity=propensity, cost=cost, seed=seed,
        grid_points=grid_points, kappa_max=kappa_max, kappa_step=kappa_step, draws=draws,
        mode=mode, kappa=kappa,
    )
    dataset = dataio.ingest(data, cost=cost, propensity=propensity, psi=psi)
    rows = gridfit.risk_heatmap(dataset.sample, _fit_config(params), mode=mode, kappa=kappa)
    manifest = dataio.build_manifest("heatmap", params, input_path=data)
    columns = {k: rows[k] for k in ("theta_deg", "phi_deg", "risk")}
    columns["risk_currency"] = rows["risk"] * dataset.meta.currency_factor
    dataio.write_csv(output_csv, columns, manifest=manifest)
    click.echo(f"{mode} heatmap over {rows['risk'].shape[0]} directions written")


@cli.command("bound")
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--mu", default=None, help="mean direction as comma-separated components")
@click.option("--kappa", type=float, default=None)
@click.option("--policy-set", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with 'atoms' (list of rule vectors) and optional 'prior'")
@_data_options
@click.option("--draws", type=int, default=1000, show_default=True)
@click.option("--output-json", type=click.Path(dir_okay=False), required=True)
def cmd_bound(data, mu, kappa, policy_set, epsilon, psi, propensity, cost, seed, draws, output_json):
    """Welfare-risk bound for a supplied vMF rule or a finite rule set."""
    params = dict(epsilon=epsilon, psi=psi, propensity=propensity, cost=cost, seed=seed,
                  draws=draws, mu=mu, kappa=kappa, policy_set=policy_set)
    dataset = dataio.ingest(data, cost=cost, propensity=propensity, psi=psi)
    bounds = gibbs.BoundConfig(n=dataset.meta.n, epsilon=epsilon)
    manifest = dataio.build_manifest("bound", params, input_path=data)
    if policy_set is not None:
        with open(policy_set) as fh:
            payload_in = json.load(fh)
        atoms = np.array([normalize_direction(a) for a in payload_in["atoms"]])
        risks = np.array([welfare.empirical_risk(dataset.sample, a) for a in atoms])
        if "prior" in payload_in:
            prior = np.asarray(payload_in["prior"], dtype=np.float64)
        else:
            prior = np.full(len(atoms), 1.0 / len(atoms))
        pset = gibbs.DiscretePolicySet(risks=risks, prior=prior, atoms=atoms)
        posterior = gibbs.solve_chi(pset, bounds)
        payload = {"manifest": manifest, "report": posterior.to_report(pset, bounds)}
        message = f"chi={posterior.chi:.6g} bound={payload['report']['bound']:.6g}"
    elif mu is not None and kappa is not None:
        direction = _parse_vector(mu)
        risk, mcse = welfare.posterior_risk_detail(dataset.sample, direction, kappa, draws, seed_chain(seed, 5))
        kl = vmf.kl_to_uniform(dataset.sample.dimension, kappa)
        bound_value = gibbs.pac_bound(risk, kl, bounds)
        payload = {
            "manifest": manifest,
            "report": {
                "mu": direction.tolist(), "kappa": kappa, "risk": risk, "risk_mcse": mcse,
                "kl": kl, "bound": bound_value,
                "bound_currency": bound_value * dataset.meta.currency_factor,
                "risk_currency": risk * dataset.meta.currency_factor,
                "n": bounds.n, "epsilon": bounds.epsilon,
            },
        }
        message = f"risk={risk:.6g} bound={bound_value:.6g}"
    else:
        raise click.UsageError("supply either --mu with --kappa, or --policy-set")
    dataio.write_json(output_json, payload)
    click.echo(message)


@cli.command("assign")
@click.argument("data", type=click.Path(exists=True, dir_okay=False))
@click.option("--mu", default=None, help="mean direction; alternatively use --fit-json")
@click.option("--kappa", type=float, default=None)
@click.option("--fit-json", type=click.Path(exists=True, dir_okay=False), default=None,
              help="result file from the fit command")
@click.option("--mode", type=click.Choice(["per-individual", "shared"]), default="per-individual", show_default=True)
@_data_options
@click.option("--draws", type=int, default=1000, show_default=True, help="draws for the propensity estimate column")
@click.option("--output-csv", type=click.Path(dir_okay=False), required=True)
def cmd_assign(data, mu, kappa, fit_json, mode, epsilon, psi, propensity, cost, seed, draws, output_csv):
    """Draw treatment assignments from a fitted stochastic rule.

    Per-individual mode draws one rule per row (the prescribed
    implementation); shared mode draws a single rule for everyone.
    """
    if fit_json is not None:
        with open(fit_json) as fh:
            fitted = json.load(fh)["result"]
        direction = np.asarray(fitted["mu"], dtype=np.float64)
        concentration = float(fitted["kappa"])
    elif mu is not None and kappa is not None:
        direction = _parse_vector(mu)
        concentration = float(kappa)
    else:
        raise click.UsageError("supply either --fit-json or both --mu and --kappa")
    params = dict(epsilon=epsilon, psi=psi, propensity=propensity, cost=cost, seed=seed,
                  draws=draws, mode=mode, mu=direction.tolist(), kappa=concentration)
    dataset = dataio.ingest(data, cost=cost, propensity=propensity, psi=psi)
    n = dataset.meta.n
    count = n if mode == "per-individual" else 1
    rules = vmf.sample_vmf(direction, concentration, count, seed_chain(seed, _ASSIGN_TAG))
    if mode == "shared":
        rules = np.repeat(rules, n, axis=0)
    assigned = (np.einsum("ij,ij->i", dataset.sample.features, rules) >= 0.0).astype(np.int8)
    props = welfare.individual_propensities(
        dataset.sample, direction, concentration, draws, seed_chain(seed, _ASSIGN_PROPENSITY_TAG)
    )
    spherical = np.array([to_spherical(r) for r in rules]) if rules.shape[1] == 3 else None
    columns: dict[str, np.ndarray] = {"row": np.arange(n)}
    if spherical is not None:
        columns["rule_theta_deg"] = spherical[:, 0]
        columns["rule_phi_deg"] = spherical[:, 1]
    columns["assigned"] = assigned
    columns["propensity_estimate"] = props
    manifest = dataio.build_manifest("assign", params, input_path=data)
    dataio.write_csv(output_csv, columns, manifest=manifest)
    click.echo(f"treated share {assigned.mean():.4f}; mean propensity {props.mean():.4f}")


@cli.command("simulate")
@click.option("--experiment", type=click.IntRange(1, 10), required=True)
@click.option("--n", type=int, default=9223, show_default=True)
@_grid_options
@click.option("--epsilon", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--regret-population", type=int, default=100_000, show_default=True)
@click.option("--output-json", type=click.Path(dir_okay=False), required=True)
@click.option("--data-csv", type=click.Path(dir_okay=False), default=None, help="also emit the generated dataset")
def cmd_simulate(experiment, n, grid_points, kappa_max, kappa_step, draws, threads, epsilon, seed, regret_population, output_json, data_csv):
    """Run one synthetic benchmark experiment end to end: generate, fit, regret."""
    params = dict(experiment=experiment, n=n, grid_points=grid_points, kappa_max=kappa_max,
                  kappa_step=kappa_step, draws=draws, epsilon=epsilon, seed=seed,
                  regret_population=regret_population)
    config = simulate.experiment_config(experiment, n=n)
    data = simulate.generate(config, seed)
    if data_csv is not None:
        dataio.write_dataset_csv(
            data_csv, data.outcomes, data.treatment, data.covariates,
            ("prior_earnings", "education"), propensity=data.propensity,
        )
    sample, meta, _ = dataio.prepare_arrays(
        data.outcomes, data.treatment, data.covariates, data.propensity
    )
    fit_config = _fit_config(dict(params, seed=seed))
    result = gridfit.fit(sample, meta, fit_config, threads=threads)
    regret, regret_mcse = simulate.population_regret(
        config, (result.mu, result.kappa), population=regret_population,
        draws=draws, seed=seed,
    )
    oracle = simulate.oracle_rule(config)
    payload = {
        "manifest": dataio.build_manifest("simulate", params),
        "experiment": experiment,
        "oracle_rule": oracle.tolist(),
        "result": result.to_dict(),
        "regret_currency": regret,
        "regret_mcse_currency": regret_mcse,
    }
    dataio.write_json(output_json, payload)
    click.echo(
        f"experiment {experiment}: kappa*={result.kappa:g} "
        f"objective={result.objective:.6g} regret=${regret:,.0f}"
    )


@cli.command("fixture")
@click.option("--n", type=int, default=9223, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-csv", type=click.Path(dir_okay=False), required=True)
def cmd_fixture(n, seed, output_csv):
    """Emit a synthetic dataset shaped like the job-training study sample."""
    config = simulate.experiment_config(1, n=n)
    data = simulate.generate(config, seed)
    dataio.write_dataset_csv(
        output_csv, data.outcomes, data.treatment, data.covariates,
        ("prior_earnings", "education"), propensity=data.propensity,
    )
    click.echo(f"wrote {n} rows to {output_csv}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 2
    except click.Abort:
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"input error: {exc}", err=True)
        return 2
    except (ArithmeticError, FloatingPointError, RuntimeError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
