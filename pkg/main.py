import argparse
import csv
import logging
import os
import sys
from typing import Any, Dict, List, Optional as optional

# Ensure the project root is in PYTHONPATH
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '.'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config import settings
from analyzers.regularity_scanner import CSV_COLUMNS, RegularityScanError, RegularityScanner, ScanVerdict
from analyzers.z2_classifier import Z2Classifier, first_indices
from core.ball_sets import BallSetError
from core.flag_geometry import FlagGeometryError
from core.group_word import GroupWordError, parse_word, word_eval
from core.json_utils import (FileFormatError, format_float, load_group_file, load_json_file, load_rep_file,
                             write_json)
from core.proximality import ProximalityError
from core.rational_matrix import RationalMatrixError, format_rational
from core.singular_values import SingularValueError, cartan_projection, sigma_gap_bounds, singular_values
from core.unipotent_z2 import UnipotentTriple, Z2RepError, Z2UnipotentRep, is_lattice_horospherical, lemma1div_ratio
from core.word_ball import BallSpec, BallSpecError
from pipelines.pingpong_pipeline import PingPongCertificate, PingPongError, PingPongPipeline, certificate_report

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_BOUNDED_WITNESS = 3
EXIT_INCONCLUSIVE = 4
EXIT_EMPTY_SAMPLE = 5
EXIT_PRECONDITION = 6

VERDICT_EXIT_CODES = {
    ScanVerdict.DIVERGENT_TREND: EXIT_OK,
    ScanVerdict.BOUNDED_WITNESS: EXIT_BOUNDED_WITNESS,
    ScanVerdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


class UsageError(Exception):
    """Custom exception for invalid flag values the parser cannot catch."""
    pass


def setup_logging(log_level_str: str = 'INFO', debug_mode: bool = False, log_file_path: optional[str] = None,
                  console_stream=None):
    """Configures logging based on command-line arguments."""
    if debug_mode:
        effective_log_level = logging.DEBUG
    else:
        effective_log_level = getattr(logging, log_level_str.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.handlers = []
    root_logger.setLevel(effective_log_level)

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s')

    # payloads printed on stdout must stay parseable, so logs go to stderr then
    console_handler = logging.StreamHandler(console_stream or sys.stdout)
    console_handler.setLevel(effective_log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file_path:
        log_dir = os.path.dirname(log_file_path)
        if log_dir and not os.path.exists(log_dir):
            try:
                os.makedirs(log_dir, exist_ok=True)
            except OSError:
                log_file_path = None

        if log_file_path:
            file_handler = logging.FileHandler(log_file_path, mode='a', encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)  # Always log debug to file
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _write_csv(header: List[str], rows: List[List[str]], path: optional[str]) -> None:
    if path in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _ball_spec(args: argparse.Namespace, generators) -> BallSpec:
    cap = settings.RADIUS_CAP if args.cap_override is None else args.cap_override
    return BallSpec(generators, args.radius, dedupe=not args.free, radius_cap=cap)


# --- subcommands ---

def cmd_cartan(args: argparse.Namespace) -> int:
    _, generators = load_group_file(args.group_file)
    word = parse_word(args.word)
    g = word_eval(generators, word)
    triple = singular_values(g)
    mu = cartan_projection(g).mu
    record: Dict[str, Any] = {
        "word": str(word),
        "matrix": g.to_strings(),
        "mu": [format_float(x) for x in mu],
        "log_gap": format_float(mu[0] - mu[1]),
        "sigma": [format_float(x) for x in triple.sigma],
        "certified_error": format_float(triple.certified_error),
    }
    if g.dim == 3:
        record["gap_bracket"] = [format_float(b) for b in sigma_gap_bounds(g)]
        try:
            record["lemma_ratio"] = format_rational(lemma1div_ratio(UnipotentTriple.from_matrix(g)))
        except Z2RepError:
            record["lemma_ratio"] = None
    write_json(record, args.out)
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    _, generators = load_group_file(args.group_file)
    spec = _ball_spec(args, generators)
    scanner = RegularityScanner(config={"DIVERGENCE_THRESHOLD": args.threshold} if args.threshold else None,
                                jobs=args.jobs)
    report = scanner.sphere_stats(spec)
    if args.format == "csv":
        _write_csv(CSV_COLUMNS, report.csv_rows(), args.out)
    else:
        write_json(report.to_dict(), args.out)
    logger.info(f"Scan verdict: {report.verdict.value}")
    return VERDICT_EXIT_CODES[report.verdict]


def cmd_classify_z2(args: argparse.Namespace) -> int:
    data = load_rep_file(args.rep_file)
    rep = Z2UnipotentRep.from_mapping(data)
    classifier = Z2Classifier()
    verdict = classifier.classify(rep)
    out = verdict.to_dict()
    if args.check and verdict.witness is not None:
        indices = first_indices(verdict.witness, args.check)
        out["check"] = [p.to_dict() for p in classifier.witness_family(rep, indices, verdict.witness)]
    write_json(out, args.out)
    return EXIT_OK


def cmd_limitset(args: argparse.Namespace) -> int:
    if args.threshold is not None and args.threshold <= 1:
        raise UsageError(f"--threshold must exceed 1, got {args.threshold}")
    _, generators = load_group_file(args.group_file)
    spec = _ball_spec(args, generators)
    scanner = RegularityScanner(jobs=args.jobs)
    sample = scanner.limit_set_sample(spec, args.threshold)
    out = sample.to_dict()
    if args.three_point:
        # horospherical lattices have a limit set of flag families, the cluster count says nothing there
        lattice_type = is_lattice_horospherical(generators)
        out["horospherical_type"] = lattice_type
        out["three_point"] = None if lattice_type else scanner.three_point_check(sample)
        logger.info(f"Three-point check: {out['three_point']} (horospherical type {lattice_type})")
    if args.format == "csv":
        _write_csv(sample.csv_header(), sample.csv_rows(), args.out)
    else:
        write_json(out, args.out)
    if not sample.flags:
        logger.warning("Limit-set sample is empty; raise the radius or lower the threshold.")
        return EXIT_EMPTY_SAMPLE
    return EXIT_OK


def cmd_pingpong_search(args: argparse.Namespace) -> int:
    _, generators = load_group_file(args.group_file)
    delta = [parse_word(w) for w in args.delta]
    pipeline = PingPongPipeline(generators, jobs=args.jobs, grid_resolution=args.resolution,
                                group_file=args.group_file)
    result = pipeline.search(delta, gamma_radius=args.gamma_radius, delta_radius=args.delta_radius,
                             sample_radius=args.sample_radius, gap_threshold=args.threshold,
                             max_power=args.max_power)
    out = result.to_dict()
    if not args.debug:
        # the run log carries timestamps; leave it out so repeated runs are byte-identical
        out.pop("run", None)
    if result.succeeded and args.out not in (None, "-"):
        write_json(result.certificate.to_dict(), args.out)
        out["certificate_file"] = args.out
        out["certificate"] = None
    write_json(out, None)
    if not result.succeeded:
        logger.warning(f"Ping-pong search failed: {result.failure_reason}")
        return EXIT_FAILED
    return EXIT_OK


def cmd_pingpong_verify(args: argparse.Namespace) -> int:
    data = load_json_file(args.certificate, context="certificate file")
    cert = PingPongCertificate.from_dict(data)
    try:
        report = certificate_report(cert, check_words=not args.skip_word_check, jobs=args.jobs)
        out = report.to_dict()
        passed = report.passed
    except PingPongError as e:
        logger.warning(f"Certificate rejected: {e}")
        out = {"passed": False, "error": str(e)}
        passed = False
    write_json(out, args.out)
    return EXIT_OK if passed else EXIT_FAILED


# --- argument parsing ---

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=str, default=None, help="Output file ('-' or omitted: stdout).")
    parser.add_argument("--jobs", type=_positive_int, default=settings.DEFAULT_JOBS, help="Worker cap.")
    parser.add_argument("--log_level", type=str, default=settings.LOG_LEVEL)
    parser.add_argument("--debug", action='store_true')
    parser.add_argument("--log_path", type=str, default=None, help="Optional log file (always DEBUG).")


def _add_ball(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--radius", type=_positive_int, default=settings.DEFAULT_RADIUS)
    parser.add_argument("--cap-override", dest="cap_override", type=_positive_int, default=None,
                        help="Raise the radius cap for this run.")
    parser.add_argument("--free", action='store_true', help="Enumerate free-group words (no matrix dedupe).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regulus",
        description="Experimental regularity checks for subgroups of SL_d(R), d = 3 or 4.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cartan", help="Singular values and Cartan projection of one word.")
    p.add_argument("group_file")
    p.add_argument("word")
    _add_common(p)
    p.set_defaults(handler=cmd_cartan)

    p = sub.add_parser("scan", help="Sphere statistics of sigma1/sigma2 and a regularity verdict.")
    p.add_argument("group_file")
    _add_ball(p)
    p.add_argument("--threshold", type=_positive_float, default=None, help="Divergence threshold override.")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _add_common(p)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("classify_z2", help="Classify a unipotent Z^2 representation in normal form.")
    p.add_argument("rep_file")
    p.add_argument("--check", type=_positive_int, default=None,
                   help="Evaluate the first N members of the witness family.")
    _add_common(p)
    p.set_defaults(handler=cmd_classify_z2)

    p = sub.add_parser("limitset", help="Sample attracting flags of the word ball.")
    p.add_argument("group_file")
    _add_ball(p)
    p.add_argument("--threshold", type=float, default=None, help="Gap threshold (> 1).")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--three-point", dest="three_point", action='store_true',
                   help="Report whether the sampled points form at most three clusters.")
    _add_common(p)
    p.set_defaults(handler=cmd_limitset)

    p = sub.add_parser("pingpong", help="Free-product certificates.")
    pp = p.add_subparsers(dest="pingpong_command", required=True)

    s = pp.add_parser("search", help="Search a certificate Delta * <gamma^N>.")
    s.add_argument("group_file")
    s.add_argument("--delta", nargs="+", required=True, help="Words generating Delta.")
    s.add_argument("--gamma-radius", dest="gamma_radius", type=_positive_int, default=settings.GAMMA_SEARCH_RADIUS)
    s.add_argument("--delta-radius", dest="delta_radius", type=_positive_int, default=settings.DELTA_BALL_RADIUS)
    s.add_argument("--sample-radius", dest="sample_radius", type=_positive_int,
                   default=settings.PINGPONG_SAMPLE_RADIUS)
    s.add_argument("--max-power", dest="max_power", type=_positive_int, default=settings.MAX_POWER)
    s.add_argument("--threshold", type=float, default=None, help="Limit-set gap threshold.")
    s.add_argument("--resolution", type=_positive_float, default=None, help="Grid resolution h.")
    _add_common(s)
    s.set_defaults(handler=cmd_pingpong_search)

    v = pp.add_parser("verify", help="Re-check a certificate file.")
    v.add_argument("certificate")
    v.add_argument("--skip-word-check", dest="skip_word_check", action='store_true')
    _add_common(v)
    v.set_defaults(handler=cmd_pingpong_verify)
    return parser


def run(argv: optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    payload_on_stdout = args.out in (None, "-") or args.handler is cmd_pingpong_search
    setup_logging(log_level_str=args.log_level, debug_mode=args.debug, log_file_path=args.log_path,
                  console_stream=sys.stderr if payload_on_stdout else sys.stdout)

    try:
        return args.handler(args)
    except (UsageError, GroupWordError, FileFormatError) as e:
        logger.error(f"Input error: {e}")
        return EXIT_USAGE
    except (BallSpecError, Z2RepError, RationalMatrixError, SingularValueError, ProximalityError,
            BallSetError, FlagGeometryError, RegularityScanError, PingPongError) as e:
        logger.error(f"Precondition failed: {e}")
        return EXIT_PRECONDITION
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_FAILED


def main():
    """
    Main entry point for the regulus command line.
    """
    sys.exit(run())


if __name__ == "__main__":
    main()
