"""Command-line interface: ``scenery-lab <command> [options]``.

Every command writes ``summary.json`` (plus CSV data files for scans) into
``--out``.  Exit codes: 0 success, 1 unexpected failure, 2 config error,
3 precision loss, 4 zero mass, 5 depth exceeded.  Failures print a JSON
error document on stderr and leave no output files behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cones, constructions, dimension, porosity
from .errors import ConfigError, InvalidParams, SceneryLabError
from .measure import support_sample
from .parallel import pmap
from .report import RunConfig, ScanReport, value
from .scenery import DEFAULT_DT, scans_to_csv
from .spec_io import canonical_json, measure_from_spec, parse_spec_arg

EXIT_OK = 0


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _point_list(text):
    try:
        return [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse point {text!r}") from None


def _require_seed(cfg: RunConfig):
    if cfg.seed is None:
        raise ConfigError(f"{cfg.command} is stochastic here and needs --seed")
    return int(cfg.seed)


def _points(cfg: RunConfig, mu):
    """Explicit ``x`` or ``points`` samples from ``mu`` (seeded)."""
    p = cfg.params
    if p.get("x") is not None:
        x = _point_list(p["x"])
        if len(x) != mu.ambient_dim:
            raise ConfigError(f"--x needs {mu.ambient_dim} coordinates")
        return np.array([x])
    n = p.get("points")
    if not n:
        raise ConfigError("give --x or --points")
    if n < 1:
        raise InvalidParams("--points must be >= 1")
    return support_sample(mu, int(n), _require_seed(cfg))


def _positive(name, v, upper=None):
    if v is None or not v > 0 or (upper is not None and v > upper):
        bound = f" and <= {upper}" if upper is not None else ""
        raise InvalidParams(f"--{name} must be > 0{bound}")
    return v


def _spread(vals):
    vals = np.asarray(vals, dtype=float)
    if len(vals) < 2:
        return 0.0
    return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# command handlers: (cfg, mu) -> (summary, data files)
# ---------------------------------------------------------------------------

def cmd_build_measure(cfg, mu):
    s = {"type": value(mu.to_spec()["type"], "parameter"),
         "ambient_dim": value(mu.ambient_dim, "parameter"),
         "max_depth": value(mu.max_depth, "parameter"),
         "resolution_floor": value(mu.resolution_floor, "closed_form"),
         "total_mass": value(mu.total_mass(0).mid, "closed_form")}
    return s, {"measure.json": canonical_json(mu.to_spec())}


def cmd_cone_constant(cfg, mu):
    p = cfg.params
    seed = _require_seed(cfg)
    eps, se = cones.cone_constant(p["dim"], p["k"], p["alpha"], p["samples"], seed)
    s = {"epsilon": value(eps, "empirical", se), "std_error": value(se, "empirical", 0.0),
         "dim": value(p["dim"], "parameter"), "k": value(p["k"], "parameter"),
         "alpha": value(p["alpha"], "parameter"), "samples": value(p["samples"], "parameter")}
    if p["dim"] == 2 and p["k"] == 1:
        s["epsilon_quadrature"] = value(cones.planar_cone_constant(p["alpha"]), "closed_form")
    return s, {}


def cmd_scan_cones(cfg, mu):
    p = cfg.params
    pts = _points(cfg, mu)
    _positive("T", p["T"])
    rel = cones.DEFAULT_REL_DEPTH if cfg.depth is None else cfg.depth
    scans = pmap(lambda item: cones.cone_scan(mu, item[1], p["T"], p["alpha"], p["k"], p["eps"],
                                              dt=p["dt"], rel_depth=rel, x_id=item[0], method=p["method"]),
                 list(enumerate(pts)))
    fr = [sc.hit_fraction for sc in scans]
    s = {"fraction": value(float(np.mean(fr)), "empirical", max(_spread(fr), 1.0 / scans[0].n_steps)),
         "epsilon_threshold": value(p["eps"], "parameter"), "alpha": value(p["alpha"], "parameter"),
         "k": value(p["k"], "parameter"), "T": value(p["T"], "parameter"),
         "n_points": value(len(pts), "parameter")}
    return s, {"cones.csv": scans_to_csv(scans)}


def _porosity(cfg, mu, annular):
    p = cfg.params
    pts = _points(cfg, mu)
    _positive("T", p["T"])
    spec = porosity.AnnularSpec(p["rho"]) if annular else None
    scans = pmap(lambda item: porosity.porosity_scan(mu, item[1], p["T"], p["alpha"], p["eps"], p["dt"],
                                                     p["grid_res"], cfg.depth, spec, item[0]),
                 list(enumerate(pts)))
    fr = [sc.hit_fraction for sc in scans]
    rows = [row for sc in scans for row in porosity.porosity_rows(sc)]
    s = {"fraction": value(float(np.mean(fr)), "empirical", max(_spread(fr), 1.0 / scans[0].n_steps)),
         "alpha": value(p["alpha"], "parameter"), "epsilon": value(p["eps"], "parameter"),
         "T": value(p["T"], "parameter"), "n_points": value(len(pts), "parameter")}
    if annular:
        s["rho"] = value(p["rho"], "parameter")
    name = "annular.csv" if annular else "porosity.csv"
    return s, {name: _csv(["x_id", "t", "alpha_hat", "y", "hole_mass_high"], rows)}


def cmd_scan_porosity(cfg, mu):
    return _porosity(cfg, mu, False)


def cmd_scan_annular(cfg, mu):
    return _porosity(cfg, mu, True)


def cmd_dim_local(cfg, mu):
    p = cfg.params
    pts = _points(cfg, mu)
    ests = pmap(lambda x: dimension.local_dimension(mu, x, p["r_min"], p["r_max"], p["n_scales"],
                                                    rel_depth=cfg.depth), list(pts))
    rows = [(i, " ".join(repr(float(v)) for v in x), e.central.value, e.lower.value, e.upper.value,
             e.central.residual) for i, (x, e) in enumerate(zip(pts, ests))]
    central = [e.central.value for e in ests]
    s = {"central": value(float(np.mean(central)), "empirical",
                          max(_spread(central), max(e.central.residual for e in ests))),
         "lower": value(float(min(e.lower.value for e in ests)), "empirical",
                        max(e.lower.residual for e in ests)),
         "upper": value(float(max(e.upper.value for e in ests)), "empirical",
                        max(e.upper.residual for e in ests)),
         "r_min": value(p["r_min"], "parameter"), "r_max": value(p["r_max"], "parameter"),
         "n_scales": value(p["n_scales"], "parameter")}
    return s, {"local_dimension.csv": _csv(["x_id", "x", "central", "lower", "upper", "residual"], rows)}


def cmd_dim_fd(cfg, mu):
    p = cfg.params
    pts = _points(cfg, mu)
    ests = pmap(lambda x: dimension.fd_dimension(mu, x, p["T"], p["r"], p["dt"], cfg.depth, p["r_check"]),
                list(pts))
    vals = [e.value for e in ests]
    rows = [(i, " ".join(repr(float(v)) for v in x), e.value, e.residual) for i, (x, e) in enumerate(zip(pts, ests))]
    s = {"fd_dimension": value(float(np.mean(vals)), "empirical",
                               max(_spread(vals), max(e.residual for e in ests))),
         "T": value(p["T"], "parameter"), "r": value(p["r"], "parameter"), "dt": value(p["dt"], "parameter")}
    if p["r_check"] is not None:
        s["r_sensitivity"] = value(max(e.extra["r_sensitivity"] for e in ests), "empirical", 0.0)
    return s, {"fd_dimension.csv": _csv(["x_id", "x", "fd_dimension", "residual"], rows)}


def cmd_dim_spectrum(cfg, mu):
    p = cfg.params
    seed = _require_seed(cfg)
    spec = dimension.dimension_spectrum(mu, p["points"], seed, p["r_min"], p["r_max"], p["n_scales"],
                                        rel_depth=cfg.depth)
    s = {name: value(est.value, "empirical", est.residual) for name, est in spec._asdict().items()}
    s.update({"n_points": value(p["points"], "parameter"), "r_min": value(p["r_min"], "parameter"),
              "r_max": value(p["r_max"], "parameter")})
    return s, {}


def cmd_density_scan(cfg, mu):
    p = cfg.params
    x = _points(cfg, mu)[0]
    scales = dimension.log_scales(p["r_min"], p["r_max"], p["n_scales"])
    res = dimension.density_scan(mu, x, p["k"], scales, cfg.depth)
    w = res.max_width
    s = {"inf_ratio": value(res.inf_ratio, "empirical", w), "sup_ratio": value(res.sup_ratio, "empirical", w),
         "slope": value(res.slope, "empirical", w), "regular": value(res.regular, "empirical", w),
         "k": value(p["k"], "parameter"), "n_scales": value(p["n_scales"], "parameter")}
    if res.regular:
        s["status"] = value(f"locally Ahlfors {p['k']:g}-regular (empirical)", "parameter")
    rows = [(float(r), float(q)) for r, q in zip(res.scales, res.ratios)]
    return s, {"density.csv": _csv(["r", "ratio"], rows)}


def cmd_check_rectifiability(cfg, mu):
    p = cfg.params
    if p.get("points_file"):
        try:
            E = np.loadtxt(p["points_file"], delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read points file: {exc}") from None
    elif mu is not None:
        E = support_sample(mu, int(p["samples"]), _require_seed(cfg))
    else:
        raise ConfigError("give --spec or --points-file")
    net = cones.DirectionNet.planar(p["n_v"], p["n_theta"])
    res = cones.rectifiability_net_scan(E, p["alpha"], p["r"], net)
    s = {"n_pass": value(res.n_pass, "closed_form"), "n_pairs": value(res.n_pairs, "closed_form"),
         "fails_everywhere": value(res.fails_everywhere, "closed_form"),
         "alpha": value(p["alpha"], "parameter"), "r": value(p["r"], "parameter")}
    ok = np.flatnonzero(res.witnesses[:, 0] >= 0)
    if len(ok):
        i, j = res.witnesses[ok[0]]
        s["witness"] = value({"pair_index": int(ok[0]), "x": E[i].tolist(), "y": E[j].tolist()}, "closed_form")
    return s, {}


def cmd_build_extremal(cfg, mu):
    p = cfg.params
    bg = "linear" if p["block"] == 0 else ("constant", p["block"])
    if p["kind"] == "conical":
        if p["s"] is None:
            raise ConfigError("conical extremal measures need --s")
        m = constructions.extremal_conical(p["dim"], p["k"], p["s"], bg, p["resolution_bits"])
        dim_pred = p["s"]
    else:
        if p["alpha"] is None or p["p"] is None:
            raise ConfigError("mean-porous extremal measures need --alpha and --p")
        m = constructions.extremal_mean_porous(p["alpha"], p["p"], p["dim"], bg, p["resolution_bits"])
        dim_pred = p["p"] * constructions.salli_dimension(p["alpha"]) + (1 - p["p"]) * p["dim"]
    spec = m.to_spec()
    s = {"q": value(spec["q"], "closed_form"), "depth": value(m.max_depth, "parameter"),
         "predicted_dimension": value(dim_pred, "closed_form")}
    return s, {"measure.json": canonical_json(spec)}


def cmd_salli(cfg, mu):
    a = cfg.params["alpha"]
    return {"alpha": value(a, "parameter"), "ratio": value(constructions.salli_ratio(a), "closed_form"),
            "dimension": value(constructions.salli_dimension(a), "closed_form")}, {}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_points(p):
    p.add_argument("--x", default=None, help="explicit point, comma separated")
    p.add_argument("--points", type=int, default=None, help="number of mu-sampled points")


def _add_scan(p, T):
    p.add_argument("--T", type=float, default=T)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)


# name -> (handler, needs a measure, argument builder)
COMMANDS = {}


def _command(name, handler, needs_measure=True):
    def register(build):
        COMMANDS[name] = (handler, needs_measure, build)
        return build
    return register


@_command("build-measure", cmd_build_measure)
def _a_build(p):
    pass


@_command("cone-constant", cmd_cone_constant, False)
def _a_cone_constant(p):
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--samples", type=int, default=10**6)


@_command("scan-cones", cmd_scan_cones)
def _a_scan_cones(p):
    _add_points(p)
    _add_scan(p, 36 * math.log(2))
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--method", choices=["auto", "sweep", "sweep-full", "generic"], default="auto")


def _a_porosity(p, annular):
    _add_points(p)
    _add_scan(p, 20.0)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--grid-res", type=int, default=porosity.DEFAULT_GRID_RES)
    if annular:
        p.add_argument("--rho", type=float, default=1.0)


@_command("scan-porosity", cmd_scan_porosity)
def _a_scan_porosity(p):
    _a_porosity(p, False)


@_command("scan-annular", cmd_scan_annular)
def _a_scan_annular(p):
    _a_porosity(p, True)


def _add_scales(p, n):
    p.add_argument("--r-min", type=float, default=dimension.DEFAULT_R_MIN)
    p.add_argument("--r-max", type=float, default=dimension.DEFAULT_R_MAX)
    p.add_argument("--n-scales", type=int, default=n)


@_command("dim-local", cmd_dim_local)
def _a_dim_local(p):
    _add_points(p)
    _add_scales(p, dimension.DEFAULT_N_SCALES)


@_command("dim-fd", cmd_dim_fd)
def _a_dim_fd(p):
    _add_points(p)
    _add_scan(p, 20.0)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--r-check", type=float, default=None, help="second radius for the r-sensitivity diagnostic")


@_command("dim-spectrum", cmd_dim_spectrum)
def _a_dim_spectrum(p):
    p.add_argument("--points", type=int, default=100)
    _add_scales(p, dimension.DEFAULT_N_SCALES)


@_command("density-scan", cmd_density_scan)
def _a_density(p):
    _add_points(p)
    p.add_argument("--k", type=float, required=True)
    _add_scales(p, 30)


@_command("check-rectifiability", cmd_check_rectifiability, needs_measure=None)
def _a_rect(p):
    p.add_argument("--points-file", default=None, help="CSV of planar points")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--n-v", type=int, default=360)
    p.add_argument("--n-theta", type=int, default=720)


@_command("build-extremal", cmd_build_extremal, False)
def _a_extremal(p):
    p.add_argument("--kind", choices=["conical", "mean-porous"], required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--block", type=int, default=0, help="constant block length (0: linear growth)")
    p.add_argument("--resolution-bits", type=int, default=40)


@_command("salli", cmd_salli, False)
def _a_salli(p):
    p.add_argument("--alpha", type=float, required=True)


_GLOBAL = ("command", "spec", "seed", "depth", "out", "config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenery-lab", description="Scenery-flow measure analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, needs, build) in COMMANDS.items():
        p = sub.add_parser(name)
        if needs is not False:
            p.add_argument("--spec", required=needs is True, default=None,
                           help="measure spec: inline JSON or a path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--depth", type=int, default=None, help="relative query depth override")
        p.add_argument("--out", default=".", help="output directory")
        build(p)
    rp = sub.add_parser("replay", help="rerun the config embedded in a summary.json")
    rp.add_argument("config", help="summary.json of an earlier run")
    rp.add_argument("--out", default=".", help="output directory")
    return parser


def config_from_args(args) -> RunConfig:
    if args.command == "replay":
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report: {exc}") from None
        return RunConfig.from_identity(doc.get("provenance", {}).get("config", {}), args.out)
    params = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
    spec = getattr(args, "spec", None)
    measure = parse_spec_arg(spec) if spec else None
    return RunConfig(args.command, params, measure, args.seed, args.depth, args.out)


def run_command(cfg: RunConfig) -> ScanReport:
    """Validate, dispatch and build the report (nothing is written here)."""
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    handler, needs, _ = COMMANDS[cfg.command]
    if needs is True and cfg.measure is None:
        raise ConfigError(f"{cfg.command} needs a measure spec")
    mu = measure_from_spec(cfg.measure) if cfg.measure is not None else None
    if cfg.depth is not None and cfg.depth < 0:
        raise InvalidParams("--depth must be >= 0")
    try:
        summary, data = handler(cfg, mu)
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc}") from None
    return ScanReport(cfg.command, summary, cfg, data)


def _error_json(exc, code):
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run_command(cfg)
        report.write()
    except SceneryLabError as exc:
        print(_error_json(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        # argument values the handlers reject without a library error
        print(_error_json(exc, ConfigError.exit_code), file=sys.stderr)
        return ConfigError.exit_code
    print(report.to_json(), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
