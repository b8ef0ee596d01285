#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Command-Line Interface for fracreg
Batch front end: solve, torsion, obstacle, barrier, diagnose and verify runs
driven by one configuration file.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

# Conditional imports for optional dependencies
try:
    from colorama import init, Fore, Style
    init(autoreset=True)
    HAS_COLORAMA = True
except ImportError:
    HAS_COLORAMA = False
    # Fallback no-op definitions
    class Fore:  # type: ignore[no-redef]
        RED = YELLOW = GREEN = CYAN = MAGENTA = WHITE = BLUE = LIGHTRED_EX = LIGHTGREEN_EX = ''

    class Style:  # type: ignore[no-redef]
        BRIGHT = RESET_ALL = DIM = ''

from source import __version__
from source.acceptance import AcceptanceSettings, run_acceptance
from source.barriers import (BARRIER_KINDS, BarrierSpec, build_superposed, build_upper_barrier,
                             verify_barrier_bound)
from source.config import COMMANDS, Config, RunConfig, create_example_config
from source.diagnostics import theorem_main_report
from source.errors import ConfigError, FracregError, NonConvergenceError
from source.geometry import normal_ball
from source.grid import Field, Grid
from source.quadrature import QuadratureScheme
from source.solver import (Obstacles, check_hopf, check_lewy_stampacchia, kkt_report,
                           solve_dirichlet, solve_double_obstacle, solve_torsion, torsion_bounds)
from source.utils import (meta_block, plot_oscillation, plot_sweep, write_csv, write_field_csv,
                          write_json)

logger = logging.getLogger('source')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NONCONVERGENCE = 2
EXIT_CONFIG = 3
EXIT_INTERRUPTED = 130

USE_COLORS = True


def print_colored(text: str, color: str = '', style: str = '') -> None:
    """Print colored text if colorama is available."""
    if HAS_COLORAMA and USE_COLORS:
        color_code = getattr(Fore, color.upper(), '')
        style_code = getattr(Style, style.upper(), '')
        print(f"{style_code}{color_code}{text}{Style.RESET_ALL}")
    else:
        print(text)


class ColoredFormatter(logging.Formatter):
    """Level-colored log lines."""

    COLORS = {
        logging.DEBUG: 'CYAN',
        logging.INFO: 'GREEN',
        logging.WARNING: 'YELLOW',
        logging.ERROR: 'RED',
        logging.CRITICAL: 'RED',
    }

    def __init__(self, use_colors: bool = True):
        super().__init__('%(levelname)-7s %(name)s: %(message)s')
        self.use_colors = use_colors and HAS_COLORAMA

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        if not self.use_colors:
            return line
        color = getattr(Fore, self.COLORS.get(record.levelno, ''), '')
        return f"{color}{line}{Style.RESET_ALL}"


def setup_logging(verbose: bool = False, use_colors: bool = True) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColoredFormatter(use_colors))
    logger.handlers[:] = [handler]
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    logger.propagate = False


def print_summary(title: str, values: Dict[str, Any]) -> None:
    print_colored(f"\n  {title}", 'CYAN', 'BRIGHT')
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"    {key}: {value}")


# ----------------------------------------------------------------------
# commands

def _grid(run: RunConfig) -> Grid:
    return Grid.covering(run.domain, run.h)


def _meta(run: RunConfig) -> Dict[str, Any]:
    return meta_block(__version__, run.raw, run.seed)


def _out(run: RunConfig, name: str) -> str:
    return str(Path(run.out) / name)


def _write_solution(run: RunConfig, u: Field, info, prefix: str,
                    extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    meta = _meta(run)
    write_field_csv(_out(run, f'{prefix}.csv'), u, meta)
    write_csv(_out(run, f'{prefix}_residuals.csv'), ['iteration', 'residual'],
              enumerate(info.residual_history), meta)
    summary = {
        'command': run.command,
        'domain': run.domain.to_dict(),
        'p': run.p,
        's': run.s,
        'grid': {'h': u.grid.h, 'n': u.grid.n_interior},
        'sup_u': u.sup(),
        'solve': info.to_dict(),
    }
    summary.update(extra or {})
    write_json(_out(run, f'{prefix}_summary.json'), summary, meta)
    return summary


def cmd_solve(run: RunConfig) -> int:
    """Dirichlet solve with the constant load of the configuration."""
    grid = _grid(run)
    u, info = solve_dirichlet(run.domain, run.load, run.solver, grid, return_info=True)
    summary = _write_solution(run, u, info, 'solution', {'load': run.load})
    print_summary('Dirichlet solve', {'n': summary['grid']['n'], 'sup u': summary['sup_u'],
                                      'iterations': info.iterations,
                                      'residual': info.residual_norm})
    return EXIT_OK


def cmd_torsion(run: RunConfig) -> int:
    """Torsion solve plus the Hopf constant and the two-sided torsion estimate."""
    grid = _grid(run)
    u, info = solve_torsion(run.domain, run.solver, grid, return_info=True)
    hopf = check_hopf(u, run.domain, run.solver)
    bounds = torsion_bounds(u, run.domain, run.solver)
    summary = _write_solution(run, u, info, 'torsion',
                              {'checks': [hopf.to_dict(), bounds.to_dict()]})
    print_summary('Torsion function', {'n': summary['grid']['n'], 'sup u': summary['sup_u'],
                                       'min u/d^s': hopf.value,
                                       'bound spread': bounds.value})
    return EXIT_OK


def cmd_obstacle(run: RunConfig) -> int:
    """
    Double obstacle problem at zero load between φ = lower_scale·(torsion
    function) and the constant ψ = obstacle.upper (none when unset).
    """
    grid = _grid(run)
    torsion = solve_torsion(run.domain, run.solver, grid)
    lower = torsion * float(run.obstacle.get('lower_scale', 0.5))
    upper_value = run.obstacle.get('upper')
    upper = None if upper_value is None else float(upper_value)
    obs = Obstacles(lower, upper)
    u, info = solve_double_obstacle(run.domain, obs, run.solver, grid, return_info=True)
    kkt = kkt_report(u, obs, run.solver)
    checks = [kkt.to_dict()]
    if upper is not None:
        checks.append(check_lewy_stampacchia(u, obs, run.solver).to_dict())
    summary = _write_solution(run, u, info, 'obstacle', {'checks': checks})
    print_summary('Double obstacle', {'n': summary['grid']['n'], 'sup u': summary['sup_u'],
                                      'lower contacts': kkt.details['lower_contacts'],
                                      'upper contacts': kkt.details['upper_contacts'],
                                      'kkt': 'pass' if kkt.passed else 'FAIL'})
    return EXIT_OK


def cmd_barrier(run: RunConfig) -> int:
    """λ-sweep of the bump barrier and, when enabled, the upper-obstacle barrier."""
    settings = run.barrier
    domain = run.domain
    grid = _grid(run)
    scheme = QuadratureScheme.for_grid(grid, **run.quadrature)
    anchor = settings.get('anchor')
    anchor = domain.boundary_points(1)[0] if anchor is None else np.asarray(anchor, dtype=float)
    kind = settings.get('kind', 'bump-lower')
    if kind not in BARRIER_KINDS:
        raise ConfigError(f"Unknown barrier kind '{kind}'; choose from {BARRIER_KINDS}")
    R = float(settings['R'])
    meta = _meta(run)
    document: Dict[str, Any] = {'domain': domain.to_dict(), 'p': run.p, 's': run.s, 'h': grid.h}
    reports = []

    if kind in ('bump-lower', 'bump-upper'):
        spec = BarrierSpec(kind, domain, anchor, R, p=run.p, s=run.s,
                           lambda_cap=float(settings['lambda_cap']))
        bound = verify_barrier_bound(spec, grid, scheme, n_lambda=int(settings['n_lambda']),
                                     max_points=int(settings['max_points']))
        rows = [('h', row['lambda'], row['K'], row['ratio']) for row in bound.details['rows']]
        rows += [('h/2', row['lambda'], row['K'], row['ratio'])
                 for row in bound.details['rows_refined']]
        write_csv(_out(run, 'barrier_sweep.csv'), ['level', 'lambda', 'K', 'ratio'], rows, meta)
        if run.plots:
            plot_sweep(_out(run, 'barrier_sweep.svg'), bound.details['rows'],
                       bound.details['rows_refined'])
        reports.append(bound)
    elif kind == 'superposed':
        spec = BarrierSpec('bump-lower', domain, anchor, R, p=run.p, s=run.s)
        torsion = solve_torsion(domain, run.solver, grid)
        ball = normal_ball(domain, anchor, R)
        _, drop = build_superposed(spec, spec.function(), torsion, ball, scheme, grid=grid,
                                   max_points=int(settings['max_points']))
        reports.append(drop)

    if kind == 'obstacle-upper' or settings.get('upper', True):
        nu = domain.inner_normal(anchor)
        xbar = anchor + float(settings.get('xbar_depth', 0.25)) * R * nu
        v, upper = build_upper_barrier(domain, R, xbar, run.solver, grid, anchor=anchor)
        write_field_csv(_out(run, 'upper_barrier.csv'), v, meta)
        reports.append(upper)

    document['checks'] = [r.to_dict() for r in reports]
    write_json(_out(run, 'barrier.json'), document, meta)
    for report in reports:
        print_colored(f"  {report.name}: {'pass' if report.passed else 'FAIL'} "
                      f"(value {report.value:.6g})", 'GREEN' if report.passed else 'RED')
    return EXIT_OK


def cmd_diagnose(run: RunConfig) -> int:
    """Main regularity report with one oscillation plot per anchor."""
    diag = run.diagnostics
    grid = _grid(run)
    report = theorem_main_report(
        run.domain, run.load, run.solver, grid, t=float(diag['scale_factor']),
        anchors=diag.get('anchors'), R0=diag.get('R0'), n_levels=int(diag['n_levels']),
        n_anchors=int(diag['n_anchors']),
    )
    report.meta = dict(report.meta or {}, **_meta(run))
    write_json(_out(run, 'diagnostics.json'), report.to_dict())
    if run.plots:
        for k, row in enumerate(report.anchors):
            plot_oscillation(_out(run, f'oscillation_{k}.svg'), row['trace'],
                             title=f"x₁ = {row['x1']}")
    print_summary('Diagnostics', {'sup u/d^s': report.sup_quotient,
                                  'alphas': [row['trace'].get('alpha') for row in report.anchors]})
    for check in report.checks:
        print_colored(f"    {check.name}: {'pass' if check.passed else 'FAIL'}",
                      'GREEN' if check.passed else 'RED')
    return EXIT_OK


def cmd_verify(run: RunConfig) -> int:
    """Run the acceptance suite; exit 1 unless every criterion passes."""
    settings = AcceptanceSettings.from_run(run)
    results = run_acceptance(settings, run.verify.get('criteria'))
    passed = all(r.passed for r in results)
    write_json(_out(run, 'verify.json'),
               {'pass': passed, 'criteria': [r.to_dict() for r in results]}, _meta(run))

    print_colored("\n  #   criterion            result   value          time", 'CYAN', 'BRIGHT')
    for r in results:
        value = 'n/a' if r.error else f"{r.value:.4g}"
        print_colored(f"  {r.number:<3} {r.name:<20} {'pass' if r.passed else 'FAIL':<8} "
                      f"{value:<14} {r.seconds:.1f}s", 'GREEN' if r.passed else 'RED')
        if r.error:
            print(f"      {r.error}")
    print_colored(f"\n  {sum(r.passed for r in results)}/{len(results)} criteria passed",
                  'GREEN' if passed else 'RED', 'BRIGHT')
    return EXIT_OK if passed else EXIT_FAILURE


HANDLERS = {
    'solve': cmd_solve,
    'torsion': cmd_torsion,
    'obstacle': cmd_obstacle,
    'barrier': cmd_barrier,
    'diagnose': cmd_diagnose,
    'verify': cmd_verify,
}


def _seed(text: str) -> int:
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fracreg',
        description='Boundary-regularity laboratory for the fractional p-Laplacian',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  fracreg torsion --config run.yaml           Torsion function and Hopf constant
  fracreg solve --config run.yaml --refine 1  Dirichlet solve on a halved grid
  fracreg diagnose --config run.yaml          Scaling and Hölder report
  fracreg barrier --config run.yaml           Barrier sweeps
  fracreg verify --quick                      Reduced acceptance suite
  fracreg --create-config                     Write config.example.yaml

Exit codes:
  0 ok, 1 failed verification, 2 nonconvergence, 3 configuration error
        """
    )
    parser.add_argument('command', nargs='?', choices=COMMANDS, help='Run to perform')

    run_group = parser.add_argument_group('run options')
    run_group.add_argument('--config', type=str, help='Load configuration from file')
    run_group.add_argument('--out', type=str, help='Output directory (default: out)')
    run_group.add_argument('--seed', type=_seed,
                           help='Seed of randomized campaigns (default: 0xF5AC)')
    run_group.add_argument('--refine', type=int, help='Halve the grid spacing k times')
    run_group.add_argument('--quick', action='store_true',
                           help='Reduced resolutions and campaign sizes for verify')
    run_group.add_argument('--create-config', type=str, nargs='?', const='config.example.yaml',
                           help='Create example config file')

    parser.add_argument('-v', '--verbose', action='store_true', help='Verbose output')
    parser.add_argument('--no-color', action='store_true', help='Plain console output')
    parser.add_argument('--no-plots', action='store_true', help='Skip SVG plots')
    parser.add_argument('--version', action='version', version=f'fracreg {__version__}')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    global USE_COLORS
    parser = build_parser()
    args = parser.parse_args(argv)
    USE_COLORS = not args.no_color
    setup_logging(args.verbose, USE_COLORS)

    try:
        if args.create_config:
            path = create_example_config(args.create_config)
            print_colored(f"  Wrote {path}", 'GREEN')
            return EXIT_OK
        if args.command is None:
            parser.print_usage()
            return EXIT_CONFIG

        config = Config(args.config) if args.config else Config()
        if args.quick:
            config.set('verify.quick', True)
        if args.no_plots:
            config.set('output.plots', False)
        run = RunConfig.from_config(config, args.command, out=args.out, seed=args.seed,
                                    refine=args.refine)
        if not run.use_colors:
            USE_COLORS = False
        logger.info("Running %s on %s (h = %g)", run.command, run.domain.kind, run.h)
        return HANDLERS[run.command](run)

    except ConfigError as e:
        print_colored(f"Configuration error: {e}", 'RED')
        return EXIT_CONFIG
    except NonConvergenceError as e:
        print_colored(f"Solver did not converge: {e} (residual {e.residual_norm:.3g} "
                      f"after {e.iterations} iterations)", 'RED')
        return EXIT_NONCONVERGENCE
    except FracregError as e:
        print_colored(f"Error: {e}", 'RED')
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print_colored("\n\nInterrupted by user", 'YELLOW')
        return EXIT_INTERRUPTED
    except Exception as e:
        print_colored(f"Unexpected error: {e}", 'RED')
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
