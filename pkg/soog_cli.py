#!/usr/bin/env python3
"""
SOOG abstraction toolkit - count, build, solve, evaluate and compare hand abstractions
"""

import argparse
import asyncio
import csv
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Type

from src.soog.abstraction import (
    ALGORITHMS,
    SEEDED_ALGORITHMS,
    AbstractionMap,
    build_map,
    phase_counts,
    reference_counts,
)
from src.soog.artifacts import (
    load_game_value,
    map_file_name,
    read_map,
    read_strategy,
    write_curves,
    write_map,
    write_report,
    write_strategy,
)
from src.soog.config import ExperimentConfig
from src.soog.errors import (
    ComplementarityViolation,
    DependencyError,
    DomainError,
    InvariantViolation,
    ParameterError,
    SoogError,
    ValidationError,
)
from src.soog.evaluator import SCENARIOS, run_asymmetric, run_profile, run_symmetric, strategy_exploitability
from src.soog.experiment import collect_curve_rows, run_experiment, write_comparison
from src.soog.games import GAMES, GameSpec
from src.soog.indexing import get_index
from src.soog.solver import AbstractionProfile, unabstracted_map

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

# Most specific first; anything else raised by the library is a usage-level error.
EXIT_CODES: List[Tuple[Type[SoogError], int]] = [
    (DependencyError, 3),
    (InvariantViolation, 2),
    (ValidationError, 2),
    (ComplementarityViolation, 2),
    (SoogError, 1),
]


def exit_code(error: SoogError) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(error, cls):
            return code
    return 1


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        logger.error(f'Usage error: {message}')
        sys.exit(1)


def map_path(config: ExperimentConfig, spec: GameSpec) -> Path:
    algorithm = config.abstraction.algorithm
    seed = config.abstraction_seed if algorithm in SEEDED_ALGORITHMS else None
    return Path(config.out) / 'maps' / map_file_name(spec.game_id, algorithm, seed)


def run_tag(config: ExperimentConfig, spec: GameSpec) -> str:
    algorithm = config.abstraction.algorithm
    tag = f'{spec.game_id}_{config.scenario}_{algorithm}'
    if algorithm in SEEDED_ALGORITHMS:
        tag += f'_s{config.abstraction_seed}'
    if config.scenario == 'asymmetric' and config.abstraction.player != 'both':
        tag += f'_p{config.abstraction.player}'
    return tag


def load_map(config: ExperimentConfig, spec: GameSpec) -> Optional[AbstractionMap]:
    """Map named by the config; raises DependencyError with the expected path when absent."""
    if config.abstraction.algorithm == 'none':
        return None
    return read_map(map_path(config, spec), config.abstraction.algorithm)


def profile_maps(config: ExperimentConfig, spec: GameSpec, alpha: Optional[AbstractionMap]):
    player = config.abstraction.player
    if config.scenario == 'symmetric' or player == 'both':
        return (alpha, alpha)
    full = unabstracted_map(spec, config.unabstracted)
    return (alpha, full) if player == '1' else (full, alpha)


def _count_target(config: ExperimentConfig, names: Sequence[str]) -> Tuple[str, str]:
    names = list(names)
    if len(names) == 2:
        return names[0], names[1]
    if len(names) == 1 and names[0] in ALGORITHMS and names[0] not in GAMES:
        return config.game, names[0]
    raise ParameterError(f'count expects [GAME] ALGORITHM, got {names}')


def cmd_count(config: ExperimentConfig, args: argparse.Namespace) -> int:
    game_id, algorithm = _count_target(config, args.names)
    if algorithm not in ALGORITHMS:
        raise ParameterError(f'Unknown algorithm {algorithm!r}; choose from {ALGORITHMS}')
    spec = config.with_values({'game': game_id}).validated().game_spec()
    k = args.k if args.k is not None else config.abstraction.k
    counts: List[Optional[int]] = []
    if algorithm == 'li':
        for phase in range(1, spec.phases + 1):
            try:
                counts.append(get_index(spec, phase).canonical_count)
            except DomainError as e:
                logger.warning(f'Phase {phase} skipped: {e}')
                counts.extend([None] * (spec.phases - phase + 1))
                break
    else:
        buckets = args.buckets if args.buckets is not None else config.abstraction.bucket_counts(spec.game_id)
        try:
            counts = list(phase_counts(spec, algorithm, k=k, buckets=buckets, seed=config.abstraction_seed))
        except DomainError as e:
            if reference_counts(spec, algorithm, k) is None:
                raise
            logger.warning(f'{spec.game_id} {algorithm} not built: {e}')
            counts = [None] * spec.phases
    reference = reference_counts(spec, algorithm, k)
    if reference is not None and None in counts:
        logger.warning(f'Filling unbuilt {spec.game_id} phases with published {algorithm} counts')
        counts = [ref if count is None else count for count, ref in zip(counts, reference)]

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f'counts_{spec.game_id}_{algorithm}.csv'
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['phase', 'count'])
        for phase, count in enumerate(counts, start=1):
            writer.writerow([phase, '' if count is None else count])
            print(f'{phase}\t{"-" if count is None else count}')
    logger.info(f'Wrote {path}')
    return 0


def cmd_build(config: ExperimentConfig, args: argparse.Namespace) -> int:
    spec = config.game_spec()
    algorithm = config.abstraction.algorithm
    if algorithm == 'none':
        logger.info('The identity abstraction needs no map file')
        return 0
    amap = build_map(
        spec,
        algorithm,
        k=config.abstraction.k,
        buckets=config.abstraction.bucket_counts(spec.game_id),
        seed=config.abstraction_seed,
    )
    path = write_map(amap, map_path(config, spec))
    print(f'{path}\t{" ".join(str(c) for c in amap.counts)}')
    return 0


def cmd_solve(config: ExperimentConfig, args: argparse.Namespace) -> int:
    spec = config.game_spec()
    alpha = load_map(config, spec)
    algorithm = config.abstraction.algorithm
    cfr = config.cfr
    seed = config.abstraction_seed
    reference = load_game_value(spec, config.out, config.value_iterations).value
    if config.scenario == 'symmetric':
        curve = run_symmetric(spec, alpha, cfr.iterations, cfr.checkpoint_every, cfr.variant, algorithm, seed,
                              reference)
    elif config.abstraction.player == 'both':
        curve = run_asymmetric(spec, (alpha, alpha), cfr.iterations, cfr.checkpoint_every, cfr.variant,
                               algorithm, seed, config.unabstracted, reference)
    else:
        curve = run_profile(spec, profile_maps(config, spec, alpha), cfr.iterations, cfr.checkpoint_every,
                            cfr.variant, 'asymmetric', algorithm, seed, reference)
    tag = run_tag(config, spec)
    out = Path(config.out)
    write_strategy(curve.strategy, out / 'strategies' / f'{tag}.sost')
    write_curves([curve], out / 'curves' / f'{tag}.csv')
    print(f'{tag}\titeration={curve.final.iteration}\teps={curve.final.eps:.6f}')
    return 0


def cmd_eval(config: ExperimentConfig, args: argparse.Namespace) -> int:
    spec = config.game_spec()
    tag = run_tag(config, spec)
    stored = read_strategy(Path(config.out) / 'strategies' / f'{tag}.sost')
    alpha = load_map(config, spec)
    sigma = stored.bind(AbstractionProfile(spec, profile_maps(config, spec, alpha)))
    reference = load_game_value(spec, config.out, config.value_iterations).value
    report = strategy_exploitability(spec, sigma, reference)
    path = write_report(report, Path(config.out) / 'reports' / f'{tag}.json')
    print(f'{tag}\teps1={report.eps1:.6f}\teps2={report.eps2:.6f}\teps={report.eps:.6f}')
    logger.info(f'Wrote {path}')
    return 0


def _check_summary(summary: Dict) -> int:
    for check in summary['checks']:
        mark = 'ok' if check['holds'] else ('FAIL' if check['asserted'] else 'inverted')
        print(f'{check["scenario"]}\t{check["claim"]}\t{mark}')
    if not summary['ok']:
        raise InvariantViolation('An asserted exploitability ordering does not hold')
    return 0


def cmd_report(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = Path(config.out)
    rows = collect_curve_rows(out)
    if not rows:
        raise DependencyError(f'No curve files under {out / "curves"}', str(out / 'curves'))
    return _check_summary(write_comparison(out, rows, config.report_delta))


def cmd_experiment(config: ExperimentConfig, args: argparse.Namespace) -> int:
    scenarios = SCENARIOS if args.scenarios == 'both' else (args.scenarios,)
    summary = asyncio.run(run_experiment(config, scenarios))
    return _check_summary(summary)


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], int]] = {
    'count': cmd_count,
    'build': cmd_build,
    'solve': cmd_solve,
    'eval': cmd_eval,
    'report': cmd_report,
    'experiment': cmd_experiment,
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description='Build, solve and evaluate signal observation abstractions')
    parser.add_argument('--game', choices=sorted(GAMES), help='Game id (default: SOOG_GAME or leduc)')
    parser.add_argument('--config', type=Path, help='Flat key=value configuration file')
    parser.add_argument('--out', type=Path, help='Output directory (default: SOOG_OUT or ./out)')
    parser.add_argument('--jobs', type=int, help='Maximum parallel jobs (default: SOOG_JOBS or 1)')
    parser.add_argument('--seed', type=int, help='Root seed for every random choice (default: SOOG_SEED or 0)')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    count = commands.add_parser('count', help='Print per-phase class counts')
    count.add_argument('names', nargs='+', metavar='[GAME] ALGORITHM')
    count.add_argument('--k', type=_int_list, help='Recall depth per phase for kroi')
    count.add_argument('--buckets', type=_int_list, help='Bucket counts per phase for ehs and paaemd')

    build = commands.add_parser('build', help='Build and save the configured abstraction map')
    solve = commands.add_parser('solve', help='Run CFR on the configured abstracted game')
    evaluate = commands.add_parser('eval', help='Recompute exploitability of a saved strategy')
    for sub in (build, solve, evaluate):
        sub.add_argument('--algorithm', choices=ALGORITHMS, help='Abstraction algorithm (default: paoi)')
    for sub in (solve, evaluate):
        sub.add_argument('--scenario', choices=SCENARIOS, help='Which players are abstracted')
        sub.add_argument('--player', choices=['both', '1', '2'],
                         help='Abstracted player in the asymmetric scenario')
    commands.add_parser('report', help='Merge curve files and check exploitability orderings')

    experiment = commands.add_parser('experiment', help='Run every report algorithm and seed, then report')
    experiment.add_argument('--scenario', dest='scenarios', choices=['asymmetric', 'symmetric', 'both'],
                            default='both')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit status."""
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.from_cli_and_env(args)
        return COMMANDS[args.command](config, args)
    except SoogError as e:
        logger.error(f'{args.command} failed: {type(e).__name__}: {e}')
        return exit_code(e)


if __name__ == '__main__':
    sys.exit(main())
