"""``sig``: command-line front end.

JSON goes to stdout, logs to stderr. Every JSON output embeds the run
configuration so a result can be reproduced from the file alone.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .curves import Curve, monomials, sample, transform
from .equivalence import RETRY_BUDGET, Verdict, equality_test, symmetry_analyze
from .errors import CurveSigError, InvalidCurve, SampleFailure
from .groups import element_from_json, random_element
from .sigmaps import MAPS
from .tracking import TrackerSettings
from .witness import IMAGE_DEDUP_TOL, MEMBERSHIP_TOL, POINT_DEDUP_TOL, STALL_LIMIT, compute_pws

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("curvesig")

WITNESS_FORMAT = "curvesig-witness/1"
EXIT_VALIDATION = 1
EXIT_SAMPLE = 2


@dataclass
class RunConfig:
    seed: int = 0
    tracker: TrackerSettings = field(default_factory=TrackerSettings)
    tolerances: dict = field(default_factory=lambda: {
        "point_dedup_tol": POINT_DEDUP_TOL,
        "image_dedup_tol": IMAGE_DEDUP_TOL,
        "membership_tol": MEMBERSHIP_TOL,
        "stall_limit": STALL_LIMIT,
        "retry_budget": RETRY_BUDGET,
    })
    map: str = "euclid_joint"

    def to_json(self) -> dict:
        return {"seed": self.seed, "tracker": self.tracker.to_dict(), "tolerances": dict(self.tolerances),
                "map": self.map, "version": __version__}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        return json.loads(raw)
    return tomllib.loads(raw.decode())


def build_config(args) -> RunConfig:
    data = load_config(args.config)
    cfg = RunConfig()
    cfg.tracker = TrackerSettings.from_mapping(data.get("tracker"))
    unknown = set(data.get("tolerances", {})) - set(cfg.tolerances)
    if unknown:
        raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
    cfg.tolerances.update(data.get("tolerances", {}))
    cfg.map = data.get("map", cfg.map)
    if args.seed is not None:
        cfg.seed = args.seed
    elif "seed" in data:
        cfg.seed = int(data["seed"])
    elif os.environ.get("SIG_SEED"):
        cfg.seed = int(os.environ["SIG_SEED"])
    if getattr(args, "map", None):
        cfg.map = args.map
    if cfg.map not in MAPS:
        raise ValueError(f"unknown map {cfg.map!r}")
    return cfg


def emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _pws(cfg: RunConfig, curve: Curve, jobs: int):
    tol = cfg.tolerances
    return compute_pws(cfg.map, curve, cfg.seed, cfg.tracker, stall_limit=int(tol["stall_limit"]), jobs=jobs,
                       point_dedup_tol=tol["point_dedup_tol"])


def _compare(cfg: RunConfig, curve0: Curve, pws1, seed: int):
    tol = cfg.tolerances
    return equality_test(curve0, pws1, cfg.tracker, seed, int(tol["retry_budget"]), tol["membership_tol"])


# commands


def cmd_sample(args, cfg: RunConfig) -> int:
    curve = Curve.load(args.curve)
    try:
        pts = sample(curve, args.n, cfg.seed)
    except SampleFailure as exc:
        log.error("%s", exc)
        return EXIT_SAMPLE
    emit({"points": [{"x": _pair(p.x), "y": _pair(p.y), "residual": p.residual} for p in pts],
          "config": cfg.to_json()})
    return 0


def cmd_witness(args, cfg: RunConfig) -> int:
    curve = Curve.load(args.curve)
    pws = _pws(cfg, curve, args.jobs)
    data = pws.to_json()
    data["config"] = cfg.to_json()
    summary = {"e": pws.e, "e_img": pws.e_img, "dim": pws.dim, "map": pws.map_id,
               "dim_expected": pws.sigmap.dim_expected, "fiber": pws.fiber_size}
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
        emit({**summary, "file": args.out, "config": cfg.to_json()})
    else:
        emit(data)
    return 0


def cmd_compare(args, cfg: RunConfig) -> int:
    c0, c1 = Curve.load(args.curve0), Curve.load(args.curve1)
    if MAPS[cfg.map].heuristic:
        log.warning("%s: verdicts are heuristic; completeness of this signature is not proven", cfg.map)
    pws1 = _pws(cfg, c1, args.jobs)
    v = _compare(cfg, c0, pws1, cfg.seed)
    emit({**v.to_json(), "config": cfg.to_json()})
    return v.exit_code


def cmd_symmetry(args, cfg: RunConfig) -> int:
    curve = Curve.load(args.curve)
    report = symmetry_analyze(curve, cfg.seed, cfg.tracker, jobs=args.jobs, recover=args.elements)
    emit({**report.to_json(with_elements=args.elements), "config": cfg.to_json()})
    return 0


def cmd_transform(args, cfg: RunConfig) -> int:
    curve = Curve.load(args.curve)
    if args.element:
        with open(args.element) as fh:
            g = element_from_json(json.load(fh))
    else:
        g = random_element("equiaffine" if args.random_equiaffine else "euclidean", cfg.seed)
    out = transform(curve, g)
    if args.element_out:
        with open(args.element_out, "w") as fh:
            json.dump(g.to_json(), fh, indent=2, sort_keys=True)
    emit(out.to_json())
    return 0


def perturb(curve: Curve, eps: float, rng) -> Curve:
    """Add eps * max|coefficient| times complex Gaussian noise to every monomial coefficient."""
    mons = monomials(curve.degree)
    c = np.array([curve.f.coefficient(m) for m in mons], dtype=complex)
    z = (rng.standard_normal(len(c)) + 1j * rng.standard_normal(len(c))) / np.sqrt(2)
    return Curve.from_coefficients(c + eps * np.abs(c).max() * z, curve.degree)


def cmd_noise(args, cfg: RunConfig) -> int:
    curve = Curve.load(args.curve)
    eps_list = [float(e) for e in args.eps_list.split(",")]
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be non-negative")
    pws = _pws(cfg, curve, args.jobs)

    def trial(key):
        i, j = key
        rng = np.random.default_rng((cfg.seed, i, j))
        g = random_element("equiaffine" if MAPS[cfg.map].id == "equiaffine_joint" else "euclidean", rng=rng)
        moved = perturb(transform(curve, g), eps_list[i], rng)
        return _compare(cfg, moved, pws, int(rng.integers(2**63))).verdict

    keys = [(i, j) for i in range(len(eps_list)) for j in range(args.trials)]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            verdicts = list(pool.map(trial, keys))
    else:
        verdicts = [trial(k) for k in keys]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps", "trials", "equivalent", "not_equivalent", "inconclusive", "equivalent_rate"])
    rates = []
    for i, eps in enumerate(eps_list):
        row = verdicts[i * args.trials: (i + 1) * args.trials]
        counts = [sum(v is kind for v in row) for kind in Verdict]
        rates.append((eps, counts[0] / args.trials))
        writer.writerow([repr(eps), args.trials, *counts, f"{counts[0] / args.trials:.6f}"])
    rates.sort()
    if any(b[1] > a[1] for a, b in zip(rates, rates[1:])):
        log.warning("equivalent rate is not monotone in eps")
    sys.stdout.write(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sig", description="Signature-based equivalence and symmetry of plane curves.")
    p.add_argument("--version", action="version",
                   version=f"sig {__version__} (witness format {WITNESS_FORMAT})")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default: $SIG_SEED or 0)")
    common.add_argument("--config", help="TOML or JSON file with [tracker] and [tolerances] sections")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for path tracking")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="sample points on a curve")
    s.add_argument("curve")
    s.add_argument("-n", type=int, default=1)
    s.set_defaults(func=cmd_sample)

    maps = sorted(MAPS)
    s = sub.add_parser("witness", parents=[common], help="compute a pseudowitness set")
    s.add_argument("curve")
    s.add_argument("--map", choices=maps)
    s.add_argument("--out")
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("compare", parents=[common], help="decide equivalence of two curves")
    s.add_argument("curve0")
    s.add_argument("curve1")
    s.add_argument("--map", choices=maps)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("symmetry", parents=[common], help="classify the Euclidean symmetry group")
    s.add_argument("curve")
    s.add_argument("--elements", action="store_true", help="recover and list the symmetry elements")
    s.set_defaults(func=cmd_symmetry)

    s = sub.add_parser("transform", parents=[common], help="apply a group element to a curve")
    s.add_argument("curve")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--random-euclidean", action="store_true")
    g.add_argument("--random-equiaffine", action="store_true")
    g.add_argument("--element", help="JSON file with a group element")
    s.add_argument("--element-out", help="write the applied element here")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("noise", parents=[common], help="verdict rates under coefficient noise (CSV)")
    s.add_argument("curve")
    s.add_argument("--map", choices=maps)
    s.add_argument("--eps-list", default="0,1e-8,1e-6,1e-4,1e-2,1e-1")
    s.add_argument("--trials", type=int, default=10)
    s.set_defaults(func=cmd_noise)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        return args.func(args, cfg)
    except (InvalidCurve, ValueError, KeyError, OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except CurveSigError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
