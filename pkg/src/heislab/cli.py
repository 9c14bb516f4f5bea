"""Command-line experiment driver.

Every subcommand writes its artifacts (CSV/JSON) into ``--out`` together with
``manifest.json`` (config echo, library versions, wall time, sha256 of each
output) and prints a JSON summary on stdout.  Invalid input exits with status
2 and a JSON error document on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np
import scipy

from . import __version__


class ConfigError(ValueError):
    pass


def _floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


class Run:
    """Collects output files for the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files: List[Path] = []

    def write_csv(self, name: str, header: List[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(path)
        return path

    def write_json(self, name: str, doc) -> Path:
        path = self.out / name
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
        self.files.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.files.append(path)
        return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_koranyi_dist(cfg, run: Run):
    from .heis_core import koranyi_dist

    p, q = np.array(_floats(cfg["p"])), np.array(_floats(cfg["q"]))
    d = koranyi_dist(p, q, variant=cfg["variant"])
    doc = {"p": p, "q": q, "variant": cfg["variant"], "distance": d}
    run.write_json("koranyi_dist.json", doc)
    return doc


def cmd_verify_metric(cfg, run: Run):
    from .heis_core import group_mul, koranyi_dist

    rng = np.random.default_rng(cfg["seed"])
    n, m = cfg["n"], cfg["samples"]
    g, p, q = (rng.standard_normal((m, 2 * n + 1)) for _ in range(3))
    r = rng.uniform(0.1, 10.0, m)
    dpq, dqg, dpg = koranyi_dist(p, q), koranyi_dist(q, g), koranyi_dist(p, g)
    rows = {
        "symmetry_exact": bool(np.array_equal(dpq, koranyi_dist(q, p))),
        "triangle_violation_max": float(np.max(dpg - dpq - dqg)),
        "left_invariance_max": float(np.max(np.abs(koranyi_dist(group_mul(g, p), group_mul(g, q)) - dpq))),
        "homogeneity_max": float(np.max(np.abs(
            koranyi_dist(_dil(r, p, n), _dil(r, q, n)) - r * dpq) / r)),
    }
    t = rng.standard_normal(m)
    vert = np.zeros((m, 2 * n + 1))
    vert[:, -1] = t
    rows["vertical_exact"] = bool(np.array_equal(koranyi_dist(vert, np.zeros_like(vert)), np.sqrt(np.abs(t))))
    rows["samples"] = m
    run.write_json("verify_metric.json", rows)
    return rows


def _dil(r, p, n):
    out = p.copy()
    out[:, :-1] *= r[:, None]
    out[:, -1] *= r * r
    return out


def cmd_comparison_scan(cfg, run: Run):
    from .heis_core import comparison_ratio_scan

    res = comparison_ratio_scan(cfg["samples"], cfg["radius"], cfg["seed"], cfg["n"])
    doc = res._asdict()
    run.write_json("comparison_scan.json", doc)
    return doc


def cmd_lefschetz(cfg, run: Run):
    from .exterior_forms import DifferentialForm, lefschetz_decompose, lefschetz_residual, random_form

    n = cfg["n"]
    if cfg["form"]:
        src = cfg["form"]
        text = Path(src).read_text(encoding="utf-8") if Path(src).is_file() else src
        kappa = DifferentialForm.from_json(text)
    else:
        rng = np.random.default_rng(cfg["seed"])
        kappa = random_form(rng, 2 * n + 1, cfg["degree"] or n + 1, 3)
    beta, sigma = lefschetz_decompose(kappa, n)
    resid = lefschetz_residual(kappa, beta, sigma, n)
    doc = {"n": n, "kappa": kappa.to_json(), "beta": beta.to_json(), "sigma": sigma.to_json(),
           "reconstruction_exact": resid.is_zero(),
           "max_residual_coefficient": max((abs(float(c)) for f in resid.terms.values()
                                            for c in f.terms.values()), default=0.0)}
    run.write_json("lefschetz.json", doc)
    return {k: doc[k] for k in ("n", "reconstruction_exact", "max_residual_coefficient")}


def stokes_test_forms(dim: int):
    """Polynomial (dim-1)-forms on R^dim whose exterior derivative has nonzero mean."""
    from .exterior_forms import DifferentialForm, Polynomial, coordinates

    if dim == 2:
        x, y = coordinates(2)
        one = Polynomial.constant(2, 1)
        return {
            "x_dy": DifferentialForm.one_form([Polynomial(2), x]),
            "xy2_dx+x3_dy": DifferentialForm.one_form([x * y * y, x ** 3]),
            "area": DifferentialForm.one_form([y * -0.5, x * 0.5]),
            "mixed": DifferentialForm.one_form([y ** 3 * -1 + x, x * (one + y * y)]),
            "quartic": DifferentialForm.one_form([y * x * x * -1, x * (one + x * x + y * y)]),
        }
    x, y, z = coordinates(3)
    one = Polynomial.constant(3, 1)
    B = DifferentialForm.basis
    return {
        "x_dydz": B(3, (1, 2), x),
        "flux": B(3, (1, 2), x) + B(3, (2, 0), y) + B(3, (0, 1), z),
        "cubic": B(3, (1, 2), x ** 3) + B(3, (0, 1), z * y * y),
        "mixed": B(3, (1, 2), x * (one + y * y)) + B(3, (2, 0), y * z * z),
        "quartic": B(3, (0, 1), z * (one + x * x + y * y + z * z)),
    }


def cmd_stokes_check(cfg, run: Run):
    from .exterior_forms import DifferentialForm
    from .sphere_mesh import loglog_slope, make_ball_mesh, stokes_residual

    dim = cfg["dim"]
    if dim not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    forms = stokes_test_forms(dim)
    if cfg["form"]:
        if cfg["form"] in forms:
            forms = {cfg["form"]: forms[cfg["form"]]}
        else:
            forms = {"custom": DifferentialForm.from_json(cfg["form"])}
    rows, slopes = [], {}
    balls = [make_ball_mesh(dim - 1, L) for L in _ints(cfg["levels"])]
    for name, om in forms.items():
        hs, rs = [], []
        for L, ball in zip(_ints(cfg["levels"]), balls):
            r = stokes_residual(None, om, ball, curved=cfg["curved"])
            h = ball.max_diameter()
            rows.append((name, L, h, r))
            hs.append(h)
            rs.append(r)
        slopes[name] = loglog_slope(hs, rs)
    run.write_csv("stokes.csv", ["form", "level", "h", "residual"], rows)
    doc = {"dim": dim, "curved": cfg["curved"], "slopes": slopes}
    run.write_json("stokes.json", doc)
    return doc


def _link_pair(name: str, m: int):
    from .linking import circle_curve, torus_link

    if name == "unlink":
        return circle_curve(m), circle_curve(m, center=(0, 0, 5))
    if name == "hopf":
        return circle_curve(m), circle_curve(m, center=(1, 0, 0), normal_axis=1)
    if name == "torus24":
        return torus_link(2, 4, m)
    raise ConfigError(f"unknown link {name!r}; use unlink, hopf or torus24")


def cmd_linking_gauss(cfg, run: Run):
    from .linking import PLCurve, gauss_linking

    if cfg["curve_a"] or cfg["curve_b"]:
        if not (cfg["curve_a"] and cfg["curve_b"]):
            raise ConfigError("give both curve_a and curve_b")
        a = PLCurve.from_csv(Path(cfg["curve_a"]).read_text(encoding="utf-8"))
        b = PLCurve.from_csv(Path(cfg["curve_b"]).read_text(encoding="utf-8"))
        label = "files"
    else:
        a, b = _link_pair(cfg["link"], cfg["points"])
        label = cfg["link"]
        run.write_text("curve_a.csv", a.to_csv())
        run.write_text("curve_b.csv", b.to_csv())
    value = gauss_linking(a, b)
    doc = {"link": label, "value": value, "nearest_integer": int(round(value))}
    run.write_json("linking_gauss.json", doc)
    return doc


def _circle_embedding():
    from .exterior_forms import Polynomial, SmoothMap, coordinates

    x, y = coordinates(2)
    return SmoothMap.polynomial([x, y, Polynomial(2)], name="planar_circle")


def cmd_linking_analytic(cfg, run: Run):
    from .approximation import sample_on_torus
    from .linking import analytic_linking, gauss_linking, circle_curve, mv_dual_loops, mv_induction_build

    form = mv_induction_build(_circle_embedding(), 1, cfg["tau"])
    loop = sample_on_torus(lambda s: np.column_stack([np.cos(s[:, 0]), np.sin(s[:, 0]), 0 * s[:, 0]]),
                           1, cfg["resolution"])
    res = analytic_linking(loop, form.omega, eps_list=_floats(cfg["eps"]), kernel=cfg["kernel"], eta=form.eta)
    gauss = sum(gauss_linking(circle_curve(2048), b) for b in mv_dual_loops(form))
    run.write_csv("linking_analytic.csv", ["eps", "value", "defect"],
                  [(e, v, d) for e, v, d in zip(res.eps, res.values, [float("nan")] + res.cauchy_defects)])
    doc = {"value": res.value, "gauss_oracle": gauss, "converged": res.converged, "note": res.note,
           "tau": cfg["tau"]}
    run.write_json("linking_analytic.json", doc)
    return doc


def cmd_mv_build(cfg, run: Run):
    from .linking import mv_induction_build

    k = cfg["k"]
    phi = np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]) if k == 0 else _circle_embedding()
    form = mv_induction_build(phi, k, cfg["tau"])
    doc = {"k": k, "tau": cfg["tau"], "integral": form.integral, "support_gap": form.support_gap}
    if form.previous is not None:
        doc["previous_integral"] = form.previous.integral
    run.write_json("mv_build.json", doc)
    return doc


def _hopf_like(name: str):
    from .gallery import hopf_map

    h = hopf_map()
    if name == "hopf_map":
        return h
    if name == "hopf_reversed":
        return lambda x: h(x * np.array([1.0, 1.0, 1.0, -1.0]))
    if name == "null":
        return lambda x: np.column_stack([x[:, 0], x[:, 1], np.full(len(x), 2.0)])
    raise ConfigError(f"unknown map {name!r}; use hopf_map, hopf_reversed or null")


def cmd_hopf(cfg, run: Run):
    from .hopf import SphereMapSample, extract_fiber, hopf_via_fibers
    from .sphere_mesh import make_sphere_mesh, random_rotation

    mesh = make_sphere_mesh(3, cfg["level"], rotation=random_rotation(4, cfg["seed"]))
    sample = SphereMapSample.from_function(_hopf_like(cfg["map"]), mesh)
    p, q = _floats(cfg["p"]), _floats(cfg["q"])
    res = hopf_via_fibers(sample, p, q)
    for tag, val in (("p", p), ("q", q)):
        for i, c in enumerate(extract_fiber(sample, val)):
            run.write_text(f"fiber_{tag}_{i}.csv", c.to_csv())
    doc = res.to_json(cfg["map"])
    run.write_json("hopf.json", doc)
    return doc


def cmd_mollify_rates(cfg, run: Run):
    from .approximation import contact_defect_rates, mollified_family, sample_map
    from .exterior_forms import DifferentialForm, contact_form
    from .gallery import get_map

    pm = get_map(cfg["map"])
    if pm.target_dim != 3:
        raise ConfigError("mollify-rates uses forms on R^3; pick a map into H_1 or R^3")
    sm = sample_map(pm, cfg["resolution"])
    fam = mollified_family(sm, _floats(cfg["eps"]), cfg["kernel"])
    forms = {"alpha": contact_form(1), "dx": DifferentialForm.basis(3, (0,))}
    rates = contact_defect_rates(fam, forms)
    run.write_csv("rates.csv", ["eps", "defect", "form_id"], list(rates.rows()))
    doc = {"map": cfg["map"], "slopes": rates.slopes}
    run.write_json("rates.json", doc)
    return doc


def cmd_holder_fit(cfg, run: Run):
    from .approximation import holder_fit
    from .gallery import get_map

    fit = holder_fit(get_map(cfg["map"]), cfg["metric"], cfg["pairs"], cfg["seed"])
    doc = fit.to_json()
    doc["map"] = cfg["map"]
    run.write_json("holder_fit.json", doc)
    return doc


def cmd_gromov_region(cfg, run: Run):
    from .approximation import gromov_value

    v = gromov_value(cfg["k"], cfg["gamma"], cfg["theta"])
    doc = {"k": cfg["k"], "gamma": cfg["gamma"], "theta": cfg["theta"], "region": v > 0, "value": float(v)}
    run.write_json("gromov_region.json", doc)
    return doc


def cmd_gallery_list(cfg, run: Run):
    from .gallery import list_maps

    doc = [{"name": name, "domain": m.domain.kind, "domain_dim": m.domain.dim, "target": m.target,
            "horizontal": m.horizontal, "tags": m.tags, "description": m.description}
           for name, m in list_maps()]
    run.write_json("gallery.json", doc)
    return doc


# name -> (handler, defaults, help, randomized)
COMMANDS: Dict[str, Any] = {
    "koranyi-dist": (cmd_koranyi_dist, {"p": None, "q": None, "variant": "gauge"}, "Koranyi distance of two points", False),
    "verify-metric": (cmd_verify_metric, {"samples": 10000, "seed": None, "n": 1}, "metric axioms on random triples", True),
    "comparison-scan": (cmd_comparison_scan, {"samples": 10000, "radius": 2.0, "seed": None, "n": 1},
                        "Euclidean/Koranyi comparison ratios", True),
    "lefschetz": (cmd_lefschetz, {"n": 1, "form": None, "degree": None, "seed": 0}, "decompose a form", False),
    "stokes-check": (cmd_stokes_check, {"dim": 2, "levels": "0,1,2,3", "form": None, "curved": False},
                     "Stokes residual convergence", False),
    "linking-gauss": (cmd_linking_gauss, {"link": "hopf", "points": 512, "curve_a": None, "curve_b": None},
                      "Gauss linking number", False),
    "linking-analytic": (cmd_linking_analytic, {"tau": 0.1, "eps": "0.04,0.02,0.01,0.005", "resolution": 4096,
                                                "kernel": "bump"}, "analytic linking of a loop", False),
    "mv-build": (cmd_mv_build, {"k": 1, "tau": 0.1}, "inductive linking form", False),
    "hopf": (cmd_hopf, {"map": "hopf_map", "level": 4, "p": "0,0,1", "q": "1,0,0", "seed": 1},
             "Hopf invariant by fiber linking", False),
    "mollify-rates": (cmd_mollify_rates, {"map": "figure_eight_polygon", "eps": "0.2,0.1,0.05,0.025,0.0125",
                                          "resolution": 16384, "kernel": "bump"}, "contact-defect rates", False),
    "holder-fit": (cmd_holder_fit, {"map": "identity_H1", "metric": "koranyi", "pairs": 10000, "seed": None},
                   "Holder exponent estimate", True),
    "gromov-region": (cmd_gromov_region, {"k": None, "gamma": None, "theta": None}, "Gromov region predicate", False),
    "gallery-list": (cmd_gallery_list, {}, "list gallery maps", False),
}

TYPES: Dict[str, Callable] = {
    "samples": int, "seed": int, "n": int, "radius": float, "degree": int, "dim": int, "points": int,
    "tau": float, "resolution": int, "k": int, "level": int, "pairs": int, "gamma": float, "theta": float,
    "curved": bool,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heislab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    for name, (_, defaults, helptext, _r) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON file of parameters; flags override it")
        sp.add_argument("--out", help="output directory (default heislab_out/<command>)")
        sp.add_argument("--threads", type=int, help="worker thread cap (default $HEISLAB_THREADS)")
        for key in defaults:
            flag = "--" + key.replace("_", "-")
            if TYPES.get(key) is bool:
                sp.add_argument(flag, dest=key, action="store_true")
            else:
                sp.add_argument(flag, dest=key, type=TYPES.get(key, str))
    return parser


def resolve_config(command: str, args: Dict[str, Any]) -> Dict[str, Any]:
    _, defaults, _, randomized = COMMANDS[command]
    cfg = dict(defaults)
    common = {"out": None, "threads": None}
    cfg.update(common)
    if args.get("config"):
        doc = json.loads(Path(args["config"]).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - set(cfg) - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if doc.get("command", command) != command:
            raise ConfigError(f"config is for {doc['command']!r}, not {command!r}")
        for k, v in doc.items():
            if k != "command":
                cfg[k] = TYPES[k](v) if k in TYPES and v is not None else v
    cfg.update({k: v for k, v in args.items() if k not in ("config", "command")})
    missing = sorted(k for k, v in cfg.items() if v is None and k in defaults
                     and k not in ("form", "degree", "curve_a", "curve_b"))
    if missing:
        hint = " (a seed is mandatory for randomized runs)" if "seed" in missing and randomized else ""
        raise ConfigError(f"missing required parameters: {missing}{hint}")
    if cfg["threads"] is None:
        env = os.environ.get("HEISLAB_THREADS")
        cfg["threads"] = int(env) if env else None
    if cfg["out"] is None:
        cfg["out"] = str(Path("heislab_out") / command)
    return cfg


def _set_threads(n):
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def main(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        parser = build_parser()
        ns = vars(parser.parse_args(argv))
        command = ns.get("command")
        if not command:
            raise ConfigError("no subcommand given; see --help")
        cfg = resolve_config(command, ns)
        _set_threads(cfg["threads"])
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        run = Run(out)
        result = COMMANDS[command][0](cfg, run)
        manifest = {
            "command": command,
            "config": cfg,
            "versions": {"heislab": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_time_s": time.perf_counter() - t0,
            "outputs": [{"file": p.name, "sha256": _sha256(p)} for p in run.files],
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n",
                                           encoding="utf-8")
        print(json.dumps(result, sort_keys=True, default=_jsonable))
        return 0
    except (ValueError, OSError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
