"""Main CLI entry point for multisub."""

import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np

from multisub import __version__
from multisub.analysis import (
    Verdict,
    analyze_convergence,
    attractor_points,
    blf_support,
    difference_decay,
    jsr_family,
    select_working_set,
    superset_distance,
    word_letters,
)
from multisub.cli.config import config
from multisub.cli.utils import (
    EXIT_FAILURE,
    EXIT_INCONCLUSIVE,
    EXIT_NOT_CONVERGENT,
    EXIT_OK,
    bbox_callback,
    exit_on_error,
    points_callback,
    raster_callback,
    sequence_callback,
    setup_logging,
    success,
    warn,
)
from multisub.config import MultisubConfig, load_config
from multisub.formats import (
    certificate,
    decay_frame,
    dump_model,
    load_scheme,
    rasterize,
    read_omega_csv,
    report_model,
    transition_dump,
    write_omega_csv,
    write_pgm,
    write_point_cloud_csv,
)
from multisub.invariant_support import (
    OmegaSet,
    construct_omega_c,
    difference_space_report,
    select_omega,
    user_omega,
)
from multisub.jsr import jsr_estimate
from multisub.lattice import LatticeSet, Point
from multisub.rational import format_rational
from multisub.scheme import (
    ExpansionVerdict,
    SchemeSet,
    check_assumption_n,
    check_jointly_expanding,
    check_sum_rules,
)
from multisub.services.logger import StageLogger, StageStatus
from multisub.transition import (
    build_transition_matrices,
    restrict_in_basis,
    restrict_to_difference_space,
    star_basis,
)

POLICIES = ["auto", "omega-c", "omega-v"]
scheme_file = click.argument("file", type=click.Path(exists=True, dir_okay=False))


def _fmt_point(p: Point) -> str:
    return str(p[0]) if len(p) == 1 else "(" + ", ".join(map(str, p)) + ")"


def _fmt_points(points) -> str:
    return "{" + ", ".join(_fmt_point(p) for p in points) + "}"


def _settings(
    policy: Optional[str] = None,
    threads: Optional[int] = None,
    max_depth: Optional[int] = None,
    max_len: Optional[int] = None,
    method: Optional[str] = None,
) -> MultisubConfig:
    """Loaded configuration with command-line overrides applied."""
    cfg = load_config()
    if policy is not None:
        cfg.omega.policy = policy
    if threads is not None:
        cfg.jsr.threads = threads
    if max_depth is not None:
        cfg.jsr.upper_depth = max_depth
    if max_len is not None:
        cfg.jsr.lower_max_len = max_len
    if method == "norm":
        cfg.jsr.max_vertices = 0
        cfg.jsr.relax_max_vertices = 0
    return cfg


def _working_omega(
    scheme: SchemeSet, cfg: MultisubConfig, omega_csv: Optional[str]
) -> tuple[SchemeSet, OmegaSet]:
    if omega_csv:
        return scheme, user_omega(scheme, read_omega_csv(omega_csv))
    working, power, omega = select_working_set(scheme, cfg, StageLogger())
    if power > 1:
        warn(f"Working with the power S^{power} ({len(working)} operators)")
    return working, omega


def _render(points: np.ndarray, plot: Optional[str], raster: tuple[int, int], bbox) -> None:
    if plot is None:
        return
    write_pgm(rasterize(points, raster[0], raster[1], bbox), plot)
    success(f"Raster written to {plot}")


jsr_options = [
    click.option("--max-depth", type=click.IntRange(min=1), help="Norm-product depth for the upper bound"),
    click.option("--max-len", type=click.IntRange(min=1), help="Longest word for the lower bound"),
    click.option("--threads", type=click.IntRange(min=1), help="Worker threads (or MULTISUB_THREADS)"),
    click.option(
        "--method",
        type=click.Choice(["polytope", "norm"]),
        default="polytope",
        show_default=True,
        help="Try the invariant polytope before norm products, or norm products only",
    ),
]

render_options = [
    click.option("--out", type=click.Path(dir_okay=False), help="CSV file for the point cloud"),
    click.option("--plot", type=click.Path(dir_okay=False), help="PGM raster of a 2-D cloud"),
    click.option("--raster", default="512x512", show_default=True, callback=raster_callback, help="Raster size WxH"),
    click.option("--bbox", callback=bbox_callback, help="Fixed box xmin,xmax,ymin,ymax"),
    click.option("--budget", type=click.IntRange(min=1), help="Point budget (or MULTISUB_POINT_BUDGET)"),
]


def _apply(options):
    def decorator(func):
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", is_flag=True, help="Log pipeline stages")
@click.option("--debug", is_flag=True, help="Log everything")
def cli(verbose, debug):
    """multisub - convergence analysis of multiple subdivision schemes."""
    setup_logging(verbose, debug)


@cli.command()
@scheme_file
@exit_on_error
def validate(file):
    """Check sum rules, digit sets, joint expansion and Assumption N."""
    scheme = load_scheme(file)
    cfg = load_config()
    ok = True

    click.echo(click.style(f"Scheme set: {len(scheme)} operators in dimension {scheme.dim}", fg="blue", bold=True))
    for op in scheme:
        success(f"Operator {op.label}: {len(op.digits)} digits represent the |det M| = {abs(op.dilation.det)} cosets")
        if any(op.mask.shift):
            warn(f"Operator {op.label}: mask was shifted by {_fmt_point(op.mask.shift)}")
        if not op.mask.contains_origin:
            warn(f"Operator {op.label}: mask support does not contain 0")
        report = check_sum_rules(op)
        if report.passed:
            success(f"Operator {op.label}: sum rules hold")
            continue
        ok = False
        click.echo(click.style(f"✗ Operator {op.label}: sum rules fail", fg="red"))
        for digit, residual in report.residuals.items():
            if residual != 0:
                click.echo(f"    coset of {_fmt_point(digit)}: residual {format_rational(residual)}")

    expansion = check_jointly_expanding(scheme, cfg.scheme.expansion_depth)
    if expansion.verdict is ExpansionVerdict.CERTIFIED_YES:
        success(f"Jointly expanding (products of length {expansion.depth})")
    elif expansion.verdict is ExpansionVerdict.CERTIFIED_NO:
        ok = False
        word = ",".join(str(j + 1) for j in expansion.witness)
        click.echo(click.style(f"✗ Not jointly expanding: word {word}", fg="red"))
    else:
        warn(f"Joint expansion undecided up to length {expansion.depth}")

    n_report = check_assumption_n(scheme)
    click.echo(click.style("\nAssumption N (||M^-1||_2 < 1):", fg="blue"))
    for label, passed in n_report.passed.items():
        line = f"  {label:>8s}  {n_report.norms[label]:.6f}  {'yes' if passed else 'no'}"
        click.echo(line if passed else click.style(line, fg="yellow"))

    sys.exit(EXIT_OK if ok else EXIT_FAILURE)


@cli.command()
@scheme_file
@click.option("--seed", multiple=True, callback=points_callback, help="Seed point such as (5) or 1,2; repeatable")
@click.option("--policy", type=click.Choice(POLICIES), default="omega-c", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV file for the points")
@click.option("--plot", type=click.Path(dir_okay=False), help="PGM raster of a 2-D set")
@click.option("--raster", default="256x256", show_default=True, callback=raster_callback)
@click.option("--bbox", callback=bbox_callback)
@exit_on_error
def omega(file, seed, policy, out, plot, raster, bbox):
    """Construct the invariant set Omega and report its difference space."""
    scheme = load_scheme(file)
    cfg = _settings(policy=policy)
    if seed:
        result = construct_omega_c(scheme, seed=LatticeSet.of(seed, scheme.dim), max_rounds=cfg.omega.max_rounds)
    else:
        result = select_omega(
            scheme,
            cfg.omega.policy,
            max_rounds=cfg.omega.max_rounds,
            join_retries=cfg.omega.join_retries,
            max_points=cfg.omega.max_points,
        )
    space = difference_space_report(result.points)

    click.echo(f"Omega: {len(result)} points ({result.provenance.value})")
    if len(result) <= 64:
        click.echo(f"  {_fmt_points(result.points)}")
    click.echo(f"dim V = {space.dim_v}, dim V~ = {space.dim_vtilde}, components = {space.components}")
    if space.connected:
        success("Omega is l1-connected")
    else:
        warn("V~ is a proper subspace of V")
        for k, component in enumerate(space.component_sets, start=1):
            shown = _fmt_points(component) if len(component) <= 8 else f"{len(component)} points"
            click.echo(f"  component {k}: {shown}")

    if out:
        write_omega_csv(result, out)
        success(f"Points written to {out}")
    _render(np.array(result.points.points, dtype=float), plot, raster, bbox)


@cli.command()
@scheme_file
@click.option("--policy", type=click.Choice(POLICIES), help="How to choose Omega")
@click.option("--omega", "omega_csv", type=click.Path(exists=True, dir_okay=False), help="Use this invariant set")
@click.option("--out", type=click.Path(dir_okay=False), help="JSON file (default: stdout)")
@exit_on_error
def transition(file, policy, omega_csv, out):
    """Dump the transition matrices over Omega as exact rationals."""
    scheme = load_scheme(file)
    working, omega_set = _working_omega(scheme, _settings(policy=policy), omega_csv)
    transitions = build_transition_matrices(working, omega_set)
    text = dump_model(transition_dump(transitions, omega_set))
    if out is None:
        click.echo(text, nl=False)
        return
    Path(out).write_text(text)
    success(f"{len(transitions)} matrices of size {len(omega_set)} written to {out}")
    if all(s == 1 for t in transitions for s in t.column_sums()):
        success("Every column sums to 1")
    else:
        warn("Some columns do not sum to 1")


@cli.command()
@scheme_file
@click.option("--policy", type=click.Choice(POLICIES), help="How to choose Omega")
@click.option("--omega", "omega_csv", type=click.Path(exists=True, dir_okay=False), help="Use this invariant set")
@_apply(jsr_options)
@click.option("--out", type=click.Path(dir_okay=False), help="Certificate JSON (default: stdout)")
@exit_on_error
def jsr(file, policy, omega_csv, max_depth, max_len, threads, method, out):
    """Bracket the joint spectral radius of the restricted transition matrices."""
    scheme = load_scheme(file)
    cfg = _settings(policy, threads, max_depth, max_len, method)
    working, omega_set = _working_omega(scheme, cfg, omega_csv)
    transitions = build_transition_matrices(working, omega_set)
    space = difference_space_report(omega_set.points)
    if space.connected:
        restricted = restrict_to_difference_space(transitions, space)
    else:
        warn(f"Omega has {space.components} components; restricting to the full zero-sum space V")
        restricted = restrict_in_basis(transitions, star_basis(len(omega_set)))

    estimate = jsr_estimate(jsr_family(restricted), cfg.jsr)
    click.echo(f"{estimate.lower:.12g} <= JSR <= {estimate.upper:.12g} ({estimate.status.value})", err=out is None)
    text = dump_model(certificate(estimate, word_letters(restricted, estimate.lower_word)))
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
        success(f"Certificate written to {out}")


_TRAIL_STYLE = {
    StageStatus.PASSED: ("✓", "green"),
    StageStatus.FAILED: ("✗", "red"),
    StageStatus.WARNING: ("!", "yellow"),
    StageStatus.INFO: ("·", None),
}


@cli.command()
@scheme_file
@click.option("--policy", type=click.Choice(POLICIES), help="How to choose Omega")
@_apply(jsr_options)
@click.option("--out", type=click.Path(dir_okay=False), help="Report JSON file")
@click.option("--json", "as_json", is_flag=True, help="Print the report JSON instead of the summary")
@exit_on_error
def convergence(file, policy, max_depth, max_len, threads, method, out, as_json):
    """Run the full pipeline; exit 0 convergent, 3 not convergent, 4 inconclusive."""
    scheme = load_scheme(file)
    cfg = _settings(policy, threads, max_depth, max_len, method)
    report = analyze_convergence(scheme, cfg)
    text = dump_model(report_model(report))

    if as_json:
        click.echo(text, nl=False)
    else:
        for entry in report.trail:
            mark, color = _TRAIL_STYLE[entry.status]
            click.echo(click.style(f"{mark} [{entry.stage}] {entry.detail}", fg=color))
        if report.jsr is not None:
            click.echo(f"\n{report.jsr.lower:.12g} <= JSR <= {report.jsr.upper:.12g} ({report.jsr.status.value})")
        color = {Verdict.CONVERGENT: "green", Verdict.NOT_CONVERGENT: "red"}.get(report.verdict, "yellow")
        click.echo(click.style(f"Verdict: {report.verdict.value}", fg=color, bold=True))
    if out:
        Path(out).write_text(text)

    codes = {
        Verdict.CONVERGENT: EXIT_OK,
        Verdict.NOT_CONVERGENT: EXIT_NOT_CONVERGENT,
        Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    }
    sys.exit(codes[report.verdict])


@cli.command()
@scheme_file
@click.option("--sequence", required=True, callback=sequence_callback, help='Operator word, e.g. "1,2" or "1,2,2;2"')
@click.option("--depth", "-n", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--sample-seed", type=int, help="Seed for subsampling (default from config)")
@_apply(render_options)
@exit_on_error
def attractor(file, sequence, depth, sample_seed, out, plot, raster, bbox, budget):
    """Truncated digit expansions of the attractor K_D along a word."""
    scheme = load_scheme(file)
    cfg = load_config()
    cloud = attractor_points(
        scheme,
        sequence,
        depth,
        budget=budget or cfg.render.point_budget,
        seed=cfg.render.seed if sample_seed is None else sample_seed,
    )
    click.echo(f"{len(cloud)} points at depth {depth}")
    if cloud.subsampled:
        warn("Expansions were subsampled to fit the point budget")
    click.echo(f"sha256: {cloud.digest()}")
    if out:
        write_point_cloud_csv(cloud, out)
        success(f"Points written to {out}")
    _render(cloud.points, plot, raster, bbox)


@cli.command()
@scheme_file
@click.option("--sequence", required=True, callback=sequence_callback, help='Operator word, e.g. "1,2,2;2"')
@click.option("--iterations", "-n", type=click.IntRange(min=1), default=9, show_default=True)
@click.option("--shift", "-r", type=click.IntRange(min=1), default=1, show_default=True, help="Start at letter r")
@click.option("--check", is_flag=True, help="Compare the support with the truncated K_A set")
@_apply(render_options)
@exit_on_error
def blf(file, sequence, iterations, shift, check, out, plot, raster, bbox, budget):
    """Support of the basic limit function along a word."""
    scheme = load_scheme(file)
    budget = budget or load_config().render.point_budget
    cloud = blf_support(scheme, sequence, iterations, r=shift, budget=budget)
    click.echo(f"{len(cloud)} support points after {iterations} iterations")
    click.echo(f"sha256: {cloud.digest()}")
    if check:
        distance, tail = superset_distance(scheme, sequence, iterations, r=shift, budget=budget)
        message = f"max distance to truncated K_A {distance:.3g}, tail bound {tail:.3g}"
        if distance <= 2 * tail:
            success(message)
        else:
            click.echo(click.style(f"✗ {message}", fg="red"))
            sys.exit(EXIT_FAILURE)
    if out:
        write_point_cloud_csv(cloud, out)
        success(f"Points written to {out}")
    _render(cloud.points, plot, raster, bbox)


@cli.command()
@scheme_file
@click.option("--sequence", required=True, callback=sequence_callback, help='Operator word, e.g. "1,2"')
@click.option("-n", "--iterations", "n", type=click.IntRange(min=0), default=12, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV file for the table")
@exit_on_error
def decay(file, sequence, n, out):
    """Table of m_n = max |difference of S_{j_n}...S_{j_1} delta| and m_n^(1/n)."""
    scheme = load_scheme(file)
    frame = decay_frame(difference_decay(scheme, sequence, n))
    click.echo(frame.to_string(index=False, float_format=lambda x: f"{x:.10g}", na_rep="-"))
    if out:
        frame.to_csv(out, index=False, float_format="%.17g")
        success(f"Table written to {out}")


# Register command groups
cli.add_command(config)


if __name__ == "__main__":
    cli()
