"""
Command-line harness
الواجهة النصية - تشغيل التجارب من سطر الأوامر وكتابة المخرجات

Subcommands: verify, transfer, enumerate, sample, analyze, disagree.
Exit codes: 0 on success, 1 on configuration or model errors, 2 when a
verification suite or a confinement assertion fails.
"""

import argparse
import csv
import logging
import sys

from dimer_model import DimerConfig
from disagreement import (PairSample, SealScales, alpha1_fit, component_diameters, conditional_frequencies,
                          confinement_check, connection_profile, sealed_grid, spans_window)
from exact_enumeration import ConfigEnsemble, partition_function
from experiment_config import OPTIONS, apply_overrides, load_config
from lattice import EdgeId
from model_errors import ConfigError, GeometryError, GuardrailError, ModelError
from monte_carlo import ChainSpec, run_chains, sample_pairs
from oracle_suite import SUITES, format_report, run_suite, suite_passed
from order_parameters import (HORIZONTAL, VERTICAL, escape_probability, percolation_report, psi_grid,
                              rarity_estimate, stick_length_histogram, sticks)
from output_writer import OutputWriter, write_manifest
from transfer_matrix import transfer_table

logger = logging.getLogger("hldimer")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2
DEFAULT_LENGTHS = (2, 4, 6, 8)


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _betas(config):
    ladder = config["model"]["beta_ladder"]
    return list(ladder) if ladder else [config["model"]["beta"]]


def chain_specs(config, progress=False):
    """مواصفات السلاسل - One ChainSpec per configured chain, sharing the master seed"""
    s = config["sampler"]
    p_pivot, p_slide = config.move_probabilities()
    snapshot_every = max(1, s["sweeps"] // s["snapshots"]) if s["snapshots"] else 0
    return [
        ChainSpec(config.window(), config.params(), s["seed"], s["sweeps"], burn_in=s["burn_in"],
                  measure_every=s["measure_every"], init=s["init"], anneal=config.anneal(),
                  init_file=s["init_file"] or None, p_pivot=p_pivot, p_slide=p_slide,
                  check_every=s["check_every"], chain_index=c, progress=progress, snapshot_every=snapshot_every)
        for c in range(s["chains"])
    ]


def seal_scales(config, params):
    s = config["sealing"]
    if s["c_scale"]:
        return SealScales(s["a_scale"], s["c_scale"], s["N"])
    return SealScales.for_model(params, s["a_scale"], s["c_const"], s["N"], config["geometry"]["H"])


def _read_config_file(path):
    with open(path, "r", encoding="utf-8") as handle:
        return DimerConfig.from_text(handle.read())


def _histogram_text(counter):
    return ";".join(f"{length}:{count}" for length, count in sorted(counter.items()))


# ==================== Subcommands ====================

def cmd_verify(args, config, writer):
    results = run_suite(args.suite, args.seed, "quick" if args.quick else "full", args.threads,
                        config["analysis"]["b_values"])
    print(format_report(results))
    writer.write_jsonl("verify.jsonl", results)
    return EXIT_OK if suite_passed(results) else EXIT_FAILED


def cmd_transfer(args, config, writer):
    lengths = args.lengths or list(DEFAULT_LENGTHS)
    rows = transfer_table([config.params(beta) for beta in _betas(config)], lengths)
    out = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    out.writeheader()
    out.writerows(rows)
    writer.write_rows("transfer", rows, config["output"]["formats"])
    return EXIT_OK


def cmd_enumerate(args, config, writer):
    window, bc = config.window(), config.boundary()
    limit = config["analysis"]["enumerate_max_edges"]
    n_edges = len(DimerConfig.empty(window, bc).stored_edges())
    if n_edges > limit:
        raise GuardrailError(f"{n_edges} stored edges exceed enumerate_max_edges = {limit}", window)
    workers = config["analysis"]["workers"]
    rows = []
    for beta in _betas(config):
        params = config.params(beta)
        ensemble = ConfigEnsemble(window, bc, params)
        z = partition_function(window, bc, params, workers=workers) if workers > 1 else ensemble.partition_function()
        rows.append({
            "beta": beta, "lambda": params.lam, "a": params.a, "configs": len(ensemble), "Z": z,
            "mean_dimers": ensemble.expectation(ensemble.occ.sum(axis=1)),
            "mean_vacancies": ensemble.expectation(ensemble.n_vac),
            "mean_broken": ensemble.expectation(ensemble.n_broken),
        })
        logger.info("beta=%g: %d configurations, Z=%.12g", beta, len(ensemble), z)
    writer.write_rows("enumerate", rows, config["output"]["formats"])
    return EXIT_OK


def cmd_sample(args, config, writer):
    if not config.boundary().is_periodic:
        raise GeometryError("the sampler runs on periodic tori, set geometry.bc = periodic", config.window())
    specs = chain_specs(config, progress=args.progress)
    records = run_chains(specs, args.threads)
    summary_rows = []
    for record in records:
        c = record.spec.chain_index
        writer.write_text(f"chain_{c}.jsonl", record.to_jsonl())
        writer.write_text(f"chain_{c}_final.cfg", record.final.to_text())
        for k, snap in enumerate(record.snapshots):
            writer.write_text(f"chain_{c}_snapshot_{k:04d}.cfg", snap.to_text())
        rates = record.acceptance
        for name, stats in record.summary().items():
            row = {"chain": c, "observable": name, **stats}
            row.update({f"accept_{move}": rate for move, rate in rates.items()})
            summary_rows.append(row)
    writer.write_rows("sample_summary", summary_rows, config["output"]["formats"])
    return EXIT_OK


def cmd_analyze(args, config, writer):
    if not args.files:
        raise ConfigError("analyze needs at least one configuration file", ("analysis", None))
    a = config["analysis"]
    scales = [(b, b) for b in a["b_values"]] or [(a["K"], a["L"])]
    samples = [(path, _read_config_file(path)) for path in args.files]
    rows = []
    summary = {}
    for K, L in scales:
        ver_sets = []
        for path, cfg in samples:
            ver = psi_grid(cfg, K, L, a["N"], VERTICAL)
            hor = psi_grid(cfg, K, L, a["N"], HORIZONTAL)
            ver_report, hor_report = percolation_report(ver), percolation_report(hor)
            hist = stick_length_histogram(sticks(cfg))
            ver_sets.append(ver.points)
            rows.append({
                "sample": path, "K": K, "L": L,
                "psi_ver": len(ver), "psi_hor": len(hor),
                "largest_ver": ver_report["largest_fraction"], "largest_hor": hor_report["largest_fraction"],
                "ver_spans_x": ver_report["spans_horizontally"], "ver_spans_y": ver_report["spans_vertically"],
                "hor_spans_x": hor_report["spans_horizontally"], "hor_spans_y": hor_report["spans_vertically"],
                "sticks_ver": _histogram_text(hist[VERTICAL]), "sticks_hor": _histogram_text(hist[HORIZONTAL]),
            })
        shape = ver.shape
        summary[f"{K}x{L}"] = {
            "escape": escape_probability(ver_sets, (0, 0), a["escape_distance"], shape),
            "rarity": rarity_estimate(ver_sets, shape),
        }
    writer.write_rows("analyze", rows, config["output"]["formats"])
    writer.write_json("analyze_summary.json", summary)
    return EXIT_OK


def _pairs(args, config):
    if args.pair:
        return [PairSample(_read_config_file(a), _read_config_file(b)) for a, b in args.pair]
    spec = chain_specs(config)[0]
    return [PairSample(s, t) for s, t in sample_pairs(spec, config["sampler"]["pairs"], args.threads)]


def cmd_disagree(args, config, writer):
    pairs = _pairs(args, config)
    scales = seal_scales(config, config.params())
    torus = pairs[0].torus
    rows = []
    violations = 0
    diameters = []
    spanning = 0
    for k, pair in enumerate(pairs):
        comps = pair.components()
        diam = component_diameters(comps, torus)
        diameters += diam
        spanning += sum(1 for comp in comps if spans_window(comp, torus))
        for row in sealed_grid(pair, scales):
            if row["sealed"]:
                bad = confinement_check(pair, (row["anchor_x"], row["anchor_y"]), scales)
                violations += len(bad)
                for seed, offending in bad:
                    logger.error("pair %d anchor (%d, %d): %r escapes through %r",
                                 k, row["anchor_x"], row["anchor_y"], seed, offending)
            rows.append({"pair": k, **row, "max_diameter": max(diam) if diam else 0})
    base = EdgeId(2 * torus.origin[0], 2 * torus.origin[1] + 1)
    displacements = [(d, 0) for d in range(1, torus.K // 2)] + [(0, d) for d in range(1, torus.L // 2)]
    profile = connection_profile(pairs, base, displacements)
    summary = {
        "scales": scales.as_dict(), "pairs": len(pairs), "violations": violations,
        "conditional": conditional_frequencies(rows), "max_diameter": max(diameters) if diameters else 0,
        "spanning_components": spanning, "profile": profile, "alpha1": alpha1_fit(profile),
    }
    writer.write_rows("disagree", rows, config["output"]["formats"])
    writer.write_json("disagree_summary.json", summary)
    if violations:
        logger.error("%d confinement violations", violations)
        return EXIT_FAILED
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "transfer": cmd_transfer,
    "enumerate": cmd_enumerate,
    "sample": cmd_sample,
    "analyze": cmd_analyze,
    "disagree": cmd_disagree,
}


# ==================== Argument parsing ====================

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--output", help="output directory (overrides [output] dir)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for chains and pairs")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="hldimer", description="Monomer-dimer simulation and analysis toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="configuration keys:\n" + OPTIONS.help_text())
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--suite", choices=sorted(SUITES), default="all")
    verify.add_argument("--quick", action="store_true", help="reduced sizes for development")
    verify.add_argument("--seed", type=int, default=20240)

    transfer = sub.add_parser("transfer", parents=[common], help="1D transfer-matrix table")
    transfer.add_argument("--lengths", type=int, nargs="+", help="even segment lengths for z_vacant")

    sub.add_parser("enumerate", parents=[common], help="exact enumeration of a small window")

    sample = sub.add_parser("sample", parents=[common], help="Metropolis chains on a torus")
    sample.add_argument("--progress", action="store_true", help="show a progress bar per chain")

    analyze = sub.add_parser("analyze", parents=[common], help="sticks and Psi grids of configuration files")
    analyze.add_argument("files", nargs="*")

    disagree = sub.add_parser("disagree", parents=[common], help="disagreement sets of independent pairs")
    disagree.add_argument("--pair", nargs=2, action="append", metavar=("SIGMA", "SIGMA_PRIME"),
                          help="two configuration files forming one pair (repeatable)")

    return parser


def run_cli(argv=None):
    """الدالة الرئيسية - Parse arguments, run one subcommand, return the exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args.config)
        apply_overrides(config, args.set)
        if args.output:
            config.set("output", "dir", args.output)
        writer = OutputWriter(config.output_dir())
        code = COMMANDS[args.command](args, config, writer)
        seeds = [args.seed] if args.command == "verify" else [config["sampler"]["seed"]]
        write_manifest(writer, config, args.command, seeds)
        return code
    except ModelError as e:
        print(e.format_error(), file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
