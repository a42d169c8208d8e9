"""Command-line entry point: ``trustframe validate|simulate|trust``.

Exit codes: 0 success, 1 validation failure, 2 unreadable or unparseable input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import TrustFrameError
from .kernel import KernelConfig, black_box_1, default_weights, weighted_trust
from .report import write_bundle
from .scenario import ScenarioConfig, ScenarioFormatError, ScenarioInvalid, load_scenario, validate_config
from .simulation import run
from .uncertainty import Observation, QualLabel, QuantSamples, UncertaintyFacet, UncertaintySet

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class EvidenceError(TrustFrameError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class EvidenceItem:
    facet: UncertaintyFacet
    observation: Observation | None = None
    certainty: float | None = None


def parse_evidence(text: str, config: ScenarioConfig) -> tuple[list[EvidenceItem], dict[str, float]]:
    """Parse the line-based evidence format (see README).

    Returns the items in file order and the weight overrides.
    """
    items, weights = [], {}
    taxonomy = config.taxonomy
    sources = {s.name for s in taxonomy.sources} | {s.id for s in taxonomy.sources}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep or not head.strip():
            raise EvidenceError(lineno, "expected '<facet>: <kind> <values>' or '@weight <source>: <w>'")
        head, rest = head.strip(), rest.strip()
        if head.startswith("@weight"):
            source = head[len("@weight"):].strip()
            if source not in sources:
                raise EvidenceError(lineno, f"unknown source {source!r}")
            try:
                w = float(rest)
            except ValueError:
                raise EvidenceError(lineno, f"weight {rest!r} is not a number") from None
            if not w > 0 or w == float("inf"):
                raise EvidenceError(lineno, f"weight must be positive and finite, got {rest}")
            weights[source] = w
            continue
        try:
            facet = taxonomy.facet(head)
        except TrustFrameError:
            raise EvidenceError(lineno, f"unknown facet {head!r}") from None
        kind, _, values = rest.partition(" ")
        values = values.split()
        try:
            if kind == "samples":
                nums, unit = [], ""
                for v in values:
                    if v.startswith("unit="):
                        unit = v[5:]
                    else:
                        nums.append(float(v))
                items.append(EvidenceItem(facet, Observation(facet, QuantSamples(tuple(nums), unit))))
            elif kind == "label":
                if len(values) != 1:
                    raise EvidenceError(lineno, "a label line carries exactly one term")
                items.append(EvidenceItem(facet, Observation(facet, QualLabel(values[0]))))
            elif kind == "certainty":
                if len(values) != 1:
                    raise EvidenceError(lineno, "a certainty line carries exactly one value")
                q = float(values[0])
                if not 0.0 <= q <= 1.0:
                    raise EvidenceError(lineno, f"certainty {q} outside [0, 1]")
                items.append(EvidenceItem(facet, certainty=q))
            else:
                raise EvidenceError(lineno, f"unknown evidence kind {kind!r} (samples, label or certainty)")
        except EvidenceError:
            raise
        except (TrustFrameError, ValueError) as exc:
            raise EvidenceError(lineno, str(exc)) from None
    if not items:
        raise EvidenceError(0, "no evidence lines")
    return items, weights


def rate_evidence(items: Sequence[EvidenceItem], weights: dict[str, float], config: ScenarioConfig):
    """(T, Q, W) for parsed evidence."""
    kernel = KernelConfig(
        config.taxonomy,
        config.rulebase,
        config.montecarlo.build(0),
        {**config.weights, **weights},
        config.resolution,
    )
    observed = [it for it in items if it.observation is not None]
    computed = iter(black_box_1(UncertaintySet(tuple(it.observation for it in observed)), kernel).values)
    q = [next(computed) if it.observation is not None else it.certainty for it in items]
    w = default_weights([it.facet for it in items], config.taxonomy, kernel.weight_overrides).values
    return weighted_trust(q, w), q, w


def _load(path: str, err) -> ScenarioConfig | int:
    try:
        return load_scenario(path)
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    except ScenarioInvalid as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=err)
        return EXIT_INVALID


def cmd_validate(args, out, err) -> int:
    config = _load(args.scenario, err)
    if isinstance(config, int):
        return config
    problems = validate_config(config)
    for v in problems:
        print(f"violation: {v}", file=out)
    if problems:
        return EXIT_INVALID
    print(f"{args.scenario}: ok", file=out)
    return EXIT_OK


def cmd_simulate(args, out, err) -> int:
    config = _load(args.scenario, err)
    if isinstance(config, int):
        return config
    config = config.with_overrides(seed=args.seed, rounds=args.rounds)
    problems = validate_config(config)
    if problems:
        for v in problems:
            print(f"violation: {v}", file=err)
        return EXIT_INVALID
    report = run(config)
    try:
        paths = write_bundle(report, args.out)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=err)
        return EXIT_IO
    summary = report.summary()
    rho = "n/a" if report.spearman is None else f"{report.spearman:.4f}"
    print(f"seed: {report.seed}", file=out)
    print(f"rounds: {summary['rounds']}", file=out)
    print(f"rated nodes: {len(report.final)}", file=out)
    print(f"spearman(latent, trust): {rho}", file=out)
    print(f"max replica divergence: {summary['max_divergence']}", file=out)
    for cid, node in summary["coordinators"].items():
        print(f"coordinator {cid}: {node}", file=out)
    print("tasks: " + ", ".join(f"{k}={v}" for k, v in summary["tasks"].items()), file=out)
    print(f"wrote {', '.join(str(p) for p in paths.values())}", file=out)
    return EXIT_OK


def cmd_trust(args, out, err) -> int:
    if args.scenario:
        config = _load(args.scenario, err)
        if isinstance(config, int):
            return config
    else:
        config = ScenarioConfig()
    try:
        text = Path(args.evidence).read_text()
    except OSError as exc:
        print(f"error: cannot read {args.evidence}: {exc.strerror or exc}", file=err)
        return EXIT_IO
    try:
        items, weights = parse_evidence(text, config)
        t, q, w = rate_evidence(items, weights, config)
    except EvidenceError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    except TrustFrameError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    print(f"T = {t:.6f}", file=out)
    print("Q = [" + ", ".join(f"{v:.6f}" for v in q) + "]", file=out)
    print("W = [" + ", ".join(f"{v:g}" for v in w) + "]", file=out)
    for it, qi, wi in zip(items, q, w):
        print(f"  {it.facet.name}: q={qi:.6f} w={wi:g}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustframe", description="Uncertainty-driven trust ratings for clustered nodes.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the quantifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run a scenario and write the report bundle")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
    p.add_argument("--rounds", type=int, default=None, help="override simulation.rounds")
    p.add_argument("--out", default="report", help="output directory (default: ./report)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trust", help="rate one evidence file")
    p.add_argument("evidence")
    p.add_argument("--scenario", default=None, help="take taxonomy, rule base and weights from this scenario")
    p.set_defaults(func=cmd_trust)
    return parser


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args, out, err)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
