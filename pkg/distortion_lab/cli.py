"""Command-line front end.

    distortion-lab <growth|map|seq|criteria|sharpness> --config <path>
                   [--out <dir>] [--jmax N] [--res N] [--plot] [--verbose]

Exit codes: 0 success, 2 input error, 3 invariant breach, 4 I/O error.
"""
import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import get_settings
from .construct import (CertifiedGood, affine_stretch, counterexample_for, load_sequence, stock_sequences)
from .criteria import (ConditionReport, RadialProfile, ball_average_limsup, divergence_integral, dominant_from_dict,
                       exp_dominant_condition, lebesgue_point_condition, log_order_condition, phi_divergence,
                       ring_condition)
from .errors import (ConfigError, DistortionLabError, GridFormatError, GrowthSpecError, InvariantBreach,
                     ParamOutOfRange, PreconditionFailed)
from .field import calderon_diameter_check, dilatation_field, holder_estimate, sample
from .functional import FunctionalSpec, Weight, semicontinuity_experiment
from .gridio import export_field_csv, read_grid, write_grid
from .growth import (GrowthFunction, calderon_integral, decompose, evaluate_many, is_strictly_convex)
from .growth_spec import growth_from_dict, growth_to_dict, load_growth
from .reports import plot_evidence, plot_growth, plot_sequence, write_csv, write_json

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK, EXIT_INPUT, EXIT_BREACH, EXIT_IO = 0, 2, 3, 4

Command = Literal["growth", "map", "seq", "criteria", "sharpness"]


class ExperimentConfig(BaseModel):
    """One CLI invocation"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: Command
    config: Path
    out: Path = Path("results")
    j_max: Optional[int] = Field(None, ge=3, le=30)
    resolution: Optional[int] = Field(None, ge=8, le=1024)
    plot: bool = False
    verbose: bool = False
    body: Dict[str, Any] = {}

    @field_validator("out")
    @classmethod
    def _writable(cls, value: Path) -> Path:
        value.mkdir(parents=True, exist_ok=True)
        if not os.access(value, os.W_OK):
            raise PermissionError(f"output directory {value} is not writable")
        return value

    def resolve(self, entry: Any) -> Any:
        """Paths inside a config are relative to the config file"""
        if isinstance(entry, str):
            return self.config.parent / entry
        return entry

    def growth(self, entry: Any) -> GrowthFunction:
        entry = self.resolve(entry)
        if isinstance(entry, Path):
            return load_growth(entry)
        if not isinstance(entry, dict):
            raise GrowthSpecError("growth function must be an object or a path")
        return growth_from_dict(entry)

    def effective_j_max(self, spec_j_max: Optional[int] = None) -> int:
        return self.j_max or spec_j_max or get_settings().cli.j_max

    def effective_resolution(self, spec_resolution: Optional[int] = None) -> int:
        return self.resolution or spec_resolution or get_settings().cli.resolution


def _read_config(path: Path) -> Dict[str, Any]:
    with open(path, "r") as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e.msg} at line {e.lineno} column {e.colno}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


# growth
def _residual_stats(g: GrowthFunction, result, t_max: float = 100.0, count: int = 10000) -> Dict[str, float]:
    ts = np.linspace(0.0, t_max, count)
    phi = evaluate_many(g, ts)
    tilde = evaluate_many(result.phi_tilde, ts)
    composed = evaluate_many(result.psi, tilde)
    residual = np.abs(composed - phi) / np.maximum(1.0, phi)
    return {
        "max_relative_residual": float(np.max(residual)),
        "mean_relative_residual": float(np.mean(residual)),
        "max_excess_phi_tilde": float(np.max(tilde - phi)),
        "grid_points": count,
        "t_max": t_max,
    }


def run_growth(config: ExperimentConfig) -> Dict[str, Any]:
    body = config.body
    g = config.growth(body["growth"] if "growth" in body else body)
    if g.is_constant():
        raise PreconditionFailed("nonconstant required: the growth function is constant")
    t_star = float(body.get("t_star", 1.0))
    convexity = is_strictly_convex(g)
    report: Dict[str, Any] = {
        "label": g.label,
        "growth": growth_to_dict(g),
        "convex": convexity.convex,
        "strict_convex": convexity.strictly_convex,
        "convexity": convexity,
        "calderon": [{"alpha": float(a), "t_star": t_star, "value": calderon_integral(g, float(a), t_star)}
                     for a in body.get("alphas", [])],
    }
    if "decompose" in body:
        alpha = float(body["decompose"]["alpha"])
        alpha_tilde = float(body["decompose"]["alpha_tilde"])
        result = decompose(g, alpha, alpha_tilde)
        report["decomposition"] = {
            "lambda": result.lam,
            "T_star": result.T_star,
            "S_star": result.S_star,
            "I": result.I,
            "t_star": result.t_star,
            "phi_tilde": growth_to_dict(result.phi_tilde),
            "psi": growth_to_dict(result.psi),
            "calderon_phi_tilde": calderon_integral(result.phi_tilde, alpha_tilde, result.t_star),
            "residuals": _residual_stats(g, result),
        }
    write_json(report, config.out / "growth_report.json")
    if config.plot:
        plot_growth(g, config.out / "growth.svg")
    return report


# map
def _mapping_from(config: ExperimentConfig, entry: Dict[str, Any]):
    resolution = config.effective_resolution(entry.get("resolution"))
    if "grid" in entry:
        return read_grid(config.resolve(entry["grid"]))
    if "stretch" in entry:
        n = int(entry.get("n", 3))
        return affine_stretch(float(entry["stretch"]), n, resolution=(resolution,) * n)
    if "sequence" in entry:
        seq, _ = load_sequence(entry["sequence"])
        member = seq.member(int(entry.get("j", 1)))
        return member if not entry.get("sampled") else sample(member, resolution)
    raise ConfigError("map needs one of grid, stretch or sequence")


def run_map(config: ExperimentConfig) -> Dict[str, Any]:
    body = config.body
    m = _mapping_from(config, body.get("map", body))
    if body.get("sampled") and m.analytic:
        m = sample(m, config.effective_resolution())
    field = dilatation_field(m)
    export_field_csv(field, config.out / "dilatation.csv")
    report: Dict[str, Any] = {"mapping": repr(m), "analytic": m.analytic, "resolution": list(m.resolution)}
    if "gamma" in body:
        report["holder"] = holder_estimate(m, float(body["gamma"]))
    if "calderon" in body:
        spec = body["calderon"]
        cubes = [(c["lower"], float(c["side"])) for c in spec["cubes"]]
        report["diameter"] = calderon_diameter_check(m, config.growth(spec["growth"]), cubes,
                                                     float(spec.get("spread", 10.0)))
    if body.get("export_grid"):
        write_grid(m, config.out / "map.qcgrid")
    write_json(report, config.out / "map_report.json")
    return report


# seq
def _functional_spec(config: ExperimentConfig, body: Dict[str, Any]) -> FunctionalSpec:
    region = body.get("region")
    return FunctionalSpec(
        phi=config.growth(body["phi"]),
        weight=Weight(body.get("weight", "unit")),
        region=tuple(tuple(float(v) for v in r) for r in region) if region else None,
        dilatation=body.get("dilatation", "P"),
    )


def run_seq(config: ExperimentConfig) -> Dict[str, Any]:
    body = config.body
    seq, spec_j_max = load_sequence(body["sequence"])
    spec = _functional_spec(config, body)
    report = semicontinuity_experiment(seq, spec, config.effective_j_max(spec_j_max))
    write_json(report, config.out / "semicontinuity.json")
    write_csv(config.out / "values.csv", ["j", "value"], zip(report.indices, report.sequence_values))
    if config.plot:
        plot_sequence(report.indices, report.sequence_values, report.limit_value, config.out / "values.svg",
                      title=f"{seq.describe()} / {spec.phi.label}")
    return report.model_dump()


# criteria
def _run_check(check: Dict[str, Any], n: int, config: ExperimentConfig) -> ConditionReport:
    name = check.get("check")
    x0 = check.get("x0", [0.0] * n)
    eps0 = float(check.get("eps0", 0.5))
    schedule = check.get("eps_schedule")
    if name in ("ball_average_limsup", "lebesgue_point", "ring_condition", "log_order_condition", "exp_dominant"):
        dominant = dominant_from_dict(check["dominant"], n)
    if name == "ball_average_limsup":
        return ball_average_limsup(dominant, x0, schedule, eps0)
    if name == "lebesgue_point":
        return lebesgue_point_condition(dominant, x0, schedule, eps0)
    if name == "ring_condition":
        return ring_condition(dominant, x0, RadialProfile.model_validate(check["psi"]), schedule, eps0)
    if name == "log_order_condition":
        return log_order_condition(dominant, x0, schedule, eps0)
    if name == "divergence_integral":
        return divergence_integral(RadialProfile.model_validate(check["profile"]), n, eps0, schedule)
    if name == "phi_divergence":
        return phi_divergence(config.growth(check["phi"]), float(check["exponent"]), float(check["delta"]))
    if name == "exp_dominant":
        region = tuple(tuple(float(v) for v in r) for r in check["region"])
        return exp_dominant_condition(dominant, float(check["alpha"]), n, region)
    raise ConfigError(f"unknown check {name!r}")


def run_criteria(config: ExperimentConfig) -> List[Dict[str, Any]]:
    body = config.body
    n = int(body.get("n", 3))
    reports = []
    for k, check in enumerate(body.get("checks", [])):
        try:
            report = _run_check(check, n, config)
        except ValidationError as e:
            raise ConfigError(f"checks[{k}]: {e.errors()[0].get('msg')}")
        except KeyError as e:
            raise ConfigError(f"checks[{k}]: missing key {e.args[0]}")
        stem = f"criteria_{k:02d}_{report.condition}"
        write_csv(config.out / f"{stem}.csv", ["scale", "value"], report.evidence)
        if config.plot:
            plot_evidence(report.evidence, config.out / f"{stem}.svg", title=report.condition)
        reports.append(report.model_dump())
    write_json(reports, config.out / "criteria.json")
    return reports


# sharpness
def _sharpness_for(phi: GrowthFunction, n: int, j_max: int) -> Dict[str, Any]:
    if phi.is_constant() and not math.isinf(phi.value_at_infinity()):
        raise PreconditionFailed(f"{phi.label}: nonconstant Phi with Phi(inf) = inf required")
    outcome = counterexample_for(phi, n)
    if isinstance(outcome, CertifiedGood):
        spec = FunctionalSpec(phi=phi)
        reports = [semicontinuity_experiment(seq, spec, j_max) for seq in stock_sequences(n)]
        failed = [r.sequence for r in reports if r.verdict != "inequality-holds"]
        if failed:
            raise InvariantBreach(f"{phi.label}: certified good but stock sequences {failed} do not hold",
                                  sequences=failed)
        return {"phi": phi.label, "dispatch": "certified-good", "evidence": outcome.evidence, "stock": reports}

    seq, witness = outcome
    report = semicontinuity_experiment(seq, FunctionalSpec(phi=phi), j_max)
    if report.verdict != "strict-violation":
        raise InvariantBreach(f"{phi.label}: dispatched {seq.kind} ({witness.reason}) gave {report.verdict}",
                              verdict=report.verdict, kind=seq.kind)
    return {"phi": phi.label, "dispatch": seq.kind, "witness": witness, "experiment": report}


def run_sharpness(config: ExperimentConfig) -> List[Dict[str, Any]]:
    body = config.body
    n = int(body.get("n", 3))
    entries = body.get("phis") or [body.get("phi", body)]
    j_max = config.effective_j_max(body.get("j_max"))
    results = [_sharpness_for(config.growth(entry), n, j_max) for entry in entries]
    write_json(results, config.out / "sharpness.json")
    return results


RUNNERS = {
    "growth": run_growth,
    "map": run_map,
    "seq": run_seq,
    "criteria": run_criteria,
    "sharpness": run_sharpness,
}


def run_command(config: ExperimentConfig) -> Any:
    """Run the requested command; missing keys and unreadable values in the config become ConfigError"""
    try:
        return RUNNERS[config.command](config)
    except KeyError as e:
        raise ConfigError(f"missing key {e.args[0]!r} in {config.config}", field=str(e.args[0]))
    except ValidationError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad value in {config.config}: {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distortion-lab",
                                     description="Numerical experiments on dilatation functionals.")
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("--config", required=True, type=Path, help="JSON config for the command")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    parser.add_argument("--jmax", type=int, default=None, help="last sequence index (3..30)")
    parser.add_argument("--res", type=int, default=None, help="grid resolution per axis (8..1024)")
    parser.add_argument("--plot", action="store_true", help="write SVG plots")
    parser.add_argument("--verbose", action="store_true", help="DEBUG logging")
    return parser


INPUT_ERRORS = (GrowthSpecError, GridFormatError, ConfigError, ParamOutOfRange, PreconditionFailed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT,
                        stream=sys.stderr)
    try:
        config = ExperimentConfig(command=args.command, config=args.config, out=args.out, j_max=args.jmax,
                                  resolution=args.res, plot=args.plot, verbose=args.verbose)
        config.body = _read_config(config.config)
        run_command(config)
    except ValidationError as e:
        logger.error(f"Invalid invocation: {e.errors()[0].get('msg')}")
        return EXIT_INPUT
    except InvariantBreach as e:
        logger.error(f"Invariant breach: {e}")
        return EXIT_BREACH
    except INPUT_ERRORS as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT
    except DistortionLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    logger.info(f"{args.command} finished, results in {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
