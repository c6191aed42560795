"""Command line front-end.

``orbithick analyze|cover|nerve|homology|certify --config PATH [--seed N] [--out DIR]``

Exit codes: 0 pass, 1 bound or check failure, 2 input error, 3 indeterminacy
or resource limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .build import CoverBuildError, ResourceLimitError
from .groups import EnumerationLimitError
from .pipeline import STAGES, ConfigError, IndeterminateError, Pipeline, RunConfig, builtin_config, canonical_json
from .thickthin import NuViolation

__all__ = ["main", "build_parser", "summary_lines"]

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INDETERMINATE = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbithick", description="Thick-part covers, nerves and homology bounds.")
    p.add_argument("stage", choices=STAGES, help="last stage to run; earlier stages run first")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="run configuration (JSON)")
    src.add_argument("--builtin", help="name of a bundled configuration, e.g. psl2z")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--eps-n", type=float, dest="eps_n", help="override the Margulis constant")
    p.add_argument("--out", help="directory for the stage artifacts")
    p.add_argument("--format", choices=("text", "json"), default="text", help="report format on stdout")
    return p


def summary_lines(stage: str, art: dict) -> List[str]:
    """Short human-readable report of a stage artifact."""
    lines = [f"stage {stage}  config {art['config_hash'][:12]}  version {art['version']}"]
    if stage == "analyze":
        lines += [f"lattice {art['lattice']} (n={art['n']}, volume {art['volume']:.6g})",
                  f"cusps {art['cusp_count']}  elliptic orders {art['elliptic_orders']}",
                  f"nu declared {art['nu']['declared']:.6g} estimate {art['nu']['estimate']:.6g}",
                  f"eta declared {art['eta']['declared']} estimate {art['eta']['estimate']}",
                  f"thin heights {[round(c['thin_height'], 6) for c in art['cusps']]}",
                  f"abelianization rank {art['abelianization']['rank']} torsion {art['abelianization']['torsion']}"]
    elif stage == "cover":
        r = art["report"]
        lines += [f"vertices {r['vertex_count']}  stretched {r['stretched']}  centres per stratum {r['centers']}"]
        lines += [f"{k}: {'pass' if v['passed'] else 'FAIL'}" for k, v in sorted(art["checks"].items())]
    elif stage == "nerve":
        lines += [f"counts {art['counts']}  max degree {art['max_degree']}  "
                  f"packing bound {art['degree_bound']['bound']}",
                  f"diagnostics {json.dumps(art['diagnostics'], sort_keys=True)}"]
    elif stage == "homology":
        f = art["full"]
        lines += [f"betti_Q {f['betti_Q']}  torsion {f['torsion_factors']}",
                  f"b1 matches abelianization: {art['b1_matches_abelianization']}"]
        if "relative" in art:
            lines.append(f"relative betti_Q {art['relative']['betti_Q']} (informational)")
    elif stage == "certify":
        c = art["certificate"]
        lines += [f"C_hat {c['C_hat']:.6g}  D_hat {c['D_hat']}  E {c['E_hat']:.6g}  F {c['F_hat']:.6g}",
                  f"betti {c['betti_Q']} <= {c['betti_bound']:.6g}: {c['betti_pass']}",
                  f"log torsion {c['log_torsion']} <= {c['torsion_bound']:.6g}: {c['torsion_pass']}",
                  f"checks {json.dumps(art['checks'], sort_keys=True)}",
                  f"certificate {'PASS' if art['passed'] else 'FAIL'}"]
    return lines


def _status(stage: str, art: dict) -> int:
    if stage == "cover" and not art["passed"]:
        return EXIT_FAIL
    if stage == "certify" and not (art["passed"] and all(art["checks"].values())):
        return EXIT_FAIL
    return EXIT_PASS


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    pipe = None
    try:
        cfg = RunConfig.load(args.config if args.config else builtin_config(args.builtin))
        if args.seed is not None:
            cfg.seed = args.seed
        if args.eps_n is not None:
            if not args.eps_n > 0:
                raise ConfigError("--eps-n must be positive")
            cfg.eps_n = args.eps_n
        pipe = Pipeline(cfg)
        art = pipe.run(args.stage)
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IndeterminateError, ResourceLimitError, EnumerationLimitError) as exc:
        print(f"indeterminate: {exc}", file=sys.stderr)
        _write(pipe, args.out)
        return EXIT_INDETERMINATE
    except (NuViolation, CoverBuildError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        _write(pipe, args.out)
        return EXIT_FAIL
    _write(pipe, args.out)
    if args.format == "json":
        sys.stdout.write(canonical_json(art))
    else:
        print("\n".join(summary_lines(args.stage, art)))
    return _status(args.stage, art)


def _write(pipe, out):
    if pipe is not None and out:
        pipe.write(out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
