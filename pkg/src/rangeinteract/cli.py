"""Command-line pipeline: ingest, simulate, svf, fit, homerange, interact, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import MarkedPointPattern, Trajectory, Window
from .envelope import run_interaction_test, theoretical_reference
from .errors import AnalysisError, DataError, NumericalError
from .homerange import (
    akde_density,
    estimate_geojson,
    kde_bandwidth,
    kde_density,
    level_set,
    mcp_estimate,
)
from .ingest import trajectories_from_csv, write_relocations_csv
from .plotting import Series, line_plot
from .ppstats import default_r_grid, fit_intensity
from .semivariogram import (
    Family,
    FitResult,
    MovementModel,
    empirical_svf,
    fit_svf_model,
    select_model,
    theoretical_svf,
)
from .simulate import SimSpec, regular_times, simulate

DAY = 86400.0
DEFAULT_T0 = 1577836800  # 2020-01-01T00:00:00Z
SHARING_DEFINITION = (
    "a calendar month (UTC) counts as shared when each animal has at least one "
    "relocation inside the other's KDE core range (level set at core_level)")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- small io helpers ------------------------------------------------------------

def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _num(v: float) -> str:
    return repr(float(v))


def _clean(obj):
    """JSON-safe copy: non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _level_tag(level: float) -> str:
    return f"{100 * level:g}"


def load_trajectories(path) -> dict[str, Trajectory]:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"input not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        trajs = [Trajectory.from_dict(d) for d in data["trajectories"]]
        return {t.animal_id: t for t in sorted(trajs, key=lambda t: t.animal_id)}
    return trajectories_from_csv(text)


def _parse_list(text: str, conv=str) -> list:
    try:
        return [conv(v.strip()) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def _levels(text: str) -> list[float]:
    levels = _parse_list(text, float)
    if not levels or any(not 0 < v < 1 for v in levels):
        raise UsageError("levels must lie in (0, 1)")
    return levels


def _map(fn, items, workers: int) -> list:
    """Apply ``fn`` to items in a bounded pool, results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _failure(item: str, exc: Exception) -> dict:
    """Failure record; the ``_exc`` entry is dropped by :func:`_strip` before output."""
    return {"item": item, "error": type(exc).__name__, "message": str(exc), "_exc": exc}


def _strip(f: dict) -> dict:
    return {k: v for k, v in f.items() if not k.startswith("_")}


def _raise_first(failures):
    raise failures[0]["_exc"]


# -- commands --------------------------------------------------------------------

def cmd_ingest(args) -> dict:
    trajs = load_trajectories(args.input)
    out = Path(args.out)
    _dump_json(out / "trajectories.json",
               {"trajectories": [t.to_dict() for t in trajs.values()]})
    summary = [("animal_id", "n", "t_start", "t_end", "median_dt_s")]
    for t in trajs.values():
        dt = float(np.median(np.diff(t.t))) if len(t) > 1 else float("nan")
        summary.append((t.animal_id, len(t), int(t.t[0]), int(t.t[-1]), _num(dt)))
    _write_text(out / "ingest_summary.csv", _csv_text(summary))
    return {"animals": list(trajs)}


def _sim_model(args) -> MovementModel:
    fam = Family(args.family)
    if fam is Family.IID:
        return MovementModel.iid(args.sill)
    if fam is Family.BROWNIAN:
        return MovementModel.brownian(args.diffusion)
    if fam is Family.OU:
        return MovementModel.ou(args.sill, args.tau_p)
    if args.tau_v is None:
        raise UsageError("OUF simulation needs --tau-v")
    return MovementModel.ouf(args.sill, args.tau_p, args.tau_v)


def _child_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def cmd_simulate(args) -> dict:
    if args.n < 2 or args.dt <= 0 or args.animals < 1:
        raise UsageError("need --n >= 2, --dt > 0 and --animals >= 1")
    base = _sim_model(args)
    times = regular_times(args.n, args.dt, args.t0)
    trajs = []
    for k in range(args.animals):
        model = MovementModel(base.family, base.sigma2, base.theta, base.tau_p, base.tau_v,
                              (k * args.spacing, 0.0), base.diffusion)
        name = f"{args.id_prefix}{k + 1}"
        trajs.append(simulate(SimSpec(model, times, _child_seed(args.seed, k)), name))
    out = Path(args.output)
    _write_text(out, write_relocations_csv(trajs, identity=True))
    return {"animals": [t.animal_id for t in trajs], "output": out.name}


def _svf_plot(ev, model=None, title=""):
    days = ev.lags / DAY
    series = [Series(days, ev.gamma_hat, "empirical", markers=True)]
    if model is not None:
        series.append(Series(days, theoretical_svf(model, ev.lags), model.family.value))
    return line_plot(series, title=title, xlabel="lag (days)", ylabel="semivariance (m^2)")


def cmd_svf(args) -> dict:
    trajs = load_trajectories(args.input)
    out = Path(args.out)
    done, failures = [], []
    for aid, tr in trajs.items():
        try:
            ev = empirical_svf(tr, args.max_lag_fraction)
        except AnalysisError as exc:
            failures.append(_failure(aid, exc))
            continue
        rows = [("tau_seconds", "gamma_m2", "pair_count")]
        rows += [(_num(t), _num(g), int(n)) for t, g, n in ev.csv_rows()]
        _write_text(out / f"svf_{_safe(aid)}.csv", _csv_text(rows))
        _write_text(out / f"svf_{_safe(aid)}.svg", _svf_plot(ev, title=f"{aid} semivariance"))
        done.append(aid)
    if failures and not args.keep_going:
        _raise_first(failures)
    return {"animals": done, "failures": failures}


def _fit_animal(tr, families, anisotropic, min_pairs, max_lag_fraction):
    ev = empirical_svf(tr, max_lag_fraction)
    fits, errors = [], []
    for fam in families:
        try:
            fits.append(fit_svf_model(ev, fam, anisotropic=anisotropic, min_pairs=min_pairs,
                                      mu=tuple(tr.xy.mean(axis=0))))
        except AnalysisError as exc:
            errors.append(_failure(f"{tr.animal_id}/{fam}", exc))
    if not fits:
        _raise_first(errors)
    return ev, select_model(fits), errors


def cmd_fit(args) -> dict:
    trajs = load_trajectories(args.input)
    families = _parse_list(args.families)
    try:
        families = [Family(f).value for f in families]
    except ValueError:
        raise UsageError(f"unknown family in {args.families!r}") from None
    out = Path(args.out)

    def work(item):
        aid, tr = item
        try:
            return aid, _fit_animal(tr, families, args.anisotropic, args.min_pairs,
                                    args.max_lag_fraction), None
        except AnalysisError as exc:
            return aid, None, exc

    combined, failures, fatal = {}, [], []
    for aid, res, exc in _map(work, trajs.items(), args.workers):
        if exc is not None:
            fatal.append(_failure(aid, exc))
            continue
        ev, ranked, errs = res
        combined[aid] = [_clean(f.to_dict()) for f in ranked]
        failures.extend(errs)
        _dump_json(out / f"fit_{_safe(aid)}.json", {"animal_id": aid, "fits": combined[aid]})
        _write_text(out / f"fit_{_safe(aid)}.svg",
                    _svf_plot(ev, ranked[0].model, title=f"{aid}: best {ranked[0].name}"))
    failures = fatal + failures
    _dump_json(out / "fits.json", {"fits": combined,
                                   "failures": [_strip(f) for f in failures]})
    if fatal and not args.keep_going:
        _raise_first(fatal)
    return {"animals": list(combined), "failures": failures}


def _load_fits(fits_dir) -> dict[str, FitResult]:
    path = Path(fits_dir) / "fits.json"
    if not path.exists():
        raise UsageError(f"no fits.json in {fits_dir}; run 'fit' first")
    data = json.loads(path.read_text(encoding="utf-8"))["fits"]
    return {aid: FitResult.from_dict(ranked[0]) for aid, ranked in data.items() if ranked}


def _homerange_animal(tr, methods, levels, grid, best_fit):
    results = []
    for method in methods:
        if method == "MCP":
            for lv in levels:
                results.append(mcp_estimate(tr, lv))
            continue
        if method == "KDE":
            dens = kde_density(tr, kde_bandwidth(tr), grid)
        else:
            if best_fit is None:
                raise DataError(f"no fitted model for {tr.animal_id}")
            dens = akde_density(tr, best_fit, grid)
        for lv in levels:
            results.append(level_set(dens, lv, method))
    return results


def cmd_homerange(args) -> dict:
    trajs = load_trajectories(args.input)
    methods = [m.upper() for m in _parse_list(args.methods)]
    if set(methods) - {"MCP", "KDE", "AKDE"}:
        raise UsageError(f"unknown method in {args.methods!r}")
    levels = _levels(args.levels)
    fits = {}
    if "AKDE" in methods:
        if not args.fits:
            raise UsageError("AKDE needs --fits pointing at the output of 'fit'")
        fits = _load_fits(args.fits)
    out = Path(args.out)

    def work(item):
        aid, tr = item
        try:
            return aid, tr, _homerange_animal(tr, methods, levels, args.grid, fits.get(aid)), None
        except AnalysisError as exc:
            return aid, tr, None, exc

    rows = [("animal_id", "method", "level", "area_km2")]
    failures = []
    for aid, tr, ests, exc in _map(work, trajs.items(), args.workers):
        if exc is not None:
            failures.append(_failure(aid, exc))
            continue
        for est in ests:
            rows.append((aid, est.method, _num(est.level), _num(est.area_km2)))
            name = f"hr_{_safe(aid)}_{est.method}_{_level_tag(est.level)}.geojson"
            _dump_json(out / name, _clean(estimate_geojson(est, aid, tr.crs)))
    _write_text(out / "areas.csv", _csv_text(rows))
    if failures and not args.keep_going:
        _raise_first(failures)
    return {"areas": len(rows) - 1, "failures": failures}


# -- interaction -------------------------------------------------------------------

def _months(t: np.ndarray) -> np.ndarray:
    return t.astype("datetime64[s]").astype("datetime64[M]").astype(np.int64)


def _month_label(m: int) -> str:
    return str(np.datetime64(int(m), "M"))


def core_ranges(trajs: dict, level: float, grid: int):
    """KDE core range per animal, plus failure records for animals without one."""
    cores, errors = {}, {}
    for aid, tr in trajs.items():
        try:
            cores[aid] = level_set(kde_density(tr, kde_bandwidth(tr), grid), level, "KDE")
        except AnalysisError as exc:
            errors[aid] = _failure(aid, exc)
    return cores, errors


def shared_months(ta: Trajectory, tb: Trajectory, core_a, core_b) -> list[int]:
    """Months where each animal has a relocation inside the other's core range."""
    ma, mb = _months(ta.t), _months(tb.t)
    a_in_b = set(ma[core_b.contains(ta.xy)].tolist())
    b_in_a = set(mb[core_a.contains(tb.xy)].tolist())
    return sorted(a_in_b & b_in_a)


def _envelope_plot(env, title):
    r = env.r
    series = [Series(r, env.observed.values, "observed"),
              Series(r, env.sim_mean, "simulation mean", dashed=True)]
    if env.observed.kind in ("L", "J"):
        series.append(Series(r, theoretical_reference(env.observed.kind, r), "independence",
                             dashed=True))
    return line_plot(series, band=(r, env.lo, env.hi), title=title, xlabel="r (m)",
                     ylabel=env.observed.kind)


def _window(text):
    if text is None:
        return None
    vals = _parse_list(text, float)
    if len(vals) != 4:
        raise UsageError("--window needs x_min,x_max,y_min,y_max")
    try:
        return Window(*vals)
    except DataError as exc:
        raise UsageError(f"--window: {exc}") from None


def _pair_tests(k_pair, a, b, trajs, args, out):
    p = MarkedPointPattern.from_groups({a: trajs[a].xy, b: trajs[b].xy}, _window(args.window))
    lam = fit_intensity(p)
    r = default_r_grid(p.window, args.r_max)
    table, details, failures = {}, [], []
    kinds = _parse_list(args.kinds)
    for kk, kind in enumerate(kinds):
        for dd, (i, j) in enumerate(((a, b), (b, a))):
            direction = f"{i}->{j}"
            try:
                env = run_interaction_test(p, i, j, kind, args.S,
                                           _child_seed(args.seed, k_pair, kk, dd), r,
                                           args.reference, args.workers, lam=lam,
                                           intensity=args.intensity)
            except AnalysisError as exc:
                failures.append(_failure(f"{a}|{b}/{kind}/{direction}", exc))
                for stat in ("MAD", "DCLF"):
                    table.setdefault(kind, {}).setdefault(stat, {})[direction] = None
                continue
            stem = f"envelope_{_safe(i)}_{_safe(j)}_{kind}"
            _write_text(out / f"{stem}.csv", _csv_text(env.csv_rows()))
            _write_text(out / f"{stem}.svg", _envelope_plot(env, f"{kind}: {direction}"))
            table.setdefault(kind, {}).setdefault("MAD", {})[direction] = env.mad_p
            table[kind].setdefault("DCLF", {})[direction] = env.dclf_p
            details.append(_clean(env.report()) | {"direction": direction, "envelope": f"{stem}.csv"})
    return {"intensity": _clean(lam.to_dict()), "pvalues": table, "tests": details}, failures


def cmd_interact(args) -> dict:
    if args.S < 1:
        raise UsageError("--S must be at least 1")
    _window(args.window)
    if not _parse_list(args.kinds) or set(_parse_list(args.kinds)) - {"L", "J"}:
        raise UsageError(f"--kinds must be drawn from L,J, got {args.kinds!r}")
    trajs = load_trajectories(args.input)
    if len(trajs) < 2:
        raise DataError("need at least two animals")
    out = Path(args.out)
    failures = []
    cores, core_errors = core_ranges(trajs, args.core_level, args.grid)
    failures.extend(core_errors.values())
    ids = sorted(trajs)
    pairs, skipped = [], []
    rows = [("animal_i", "animal_j", "statistic", "test", "direction", "p_value")]
    k_pair = 0
    for x in range(len(ids)):
        for y in range(x + 1, len(ids)):
            a, b = ids[x], ids[y]
            if a in core_errors or b in core_errors:
                bad = a if a in core_errors else b
                pairs.append({"pair": [a, b], "error": core_errors[bad]["error"],
                              "message": f"no core range for {bad}"})
                continue
            months = shared_months(trajs[a], trajs[b], cores[a], cores[b])
            entry = {"pair": [a, b], "shared_months": [_month_label(m) for m in months]}
            if len(months) < args.min_months:
                skipped.append(entry)
                continue
            try:
                res, errs = _pair_tests(k_pair, a, b, trajs, args, out)
            except AnalysisError as exc:
                failures.append(_failure(f"{a}|{b}", exc))
                entry["error"] = type(exc).__name__
                pairs.append(entry)
                k_pair += 1
                continue
            k_pair += 1
            failures.extend(errs)
            entry.update(res)
            pairs.append(entry)
            for kind, stats in res["pvalues"].items():
                for stat, dirs in stats.items():
                    for direction, pv in dirs.items():
                        rows.append((a, b, kind, stat, direction, "" if pv is None else _num(pv)))
    report = {
        "sharing_definition": SHARING_DEFINITION,
        "min_months": args.min_months,
        "core_level": args.core_level,
        "S": args.S,
        "seed": args.seed,
        "reference": args.reference,
        "intensity": args.intensity,
        "null_model": ("random torus shift of the second animal's points; its log-linear "
                       "intensity is refitted to each shifted pattern" if args.intensity == "refit"
                       else "random torus shift of the second animal's points and fitted intensity"),
        "pairs": pairs,
        "skipped_pairs": skipped,
        "failures": [_strip(f) for f in failures],
    }
    _dump_json(out / "interaction.json", _clean(report))
    _write_text(out / "pvalues.csv", _csv_text(rows))
    return {"pairs": len(pairs), "failures": failures}


def cmd_report(args) -> dict:
    out = Path(args.out)
    trajs = load_trajectories(args.input)
    failures = []
    index = {"input": Path(args.input).name, "version": __version__, "steps": {}}

    def step(name, fn, ns):
        try:
            res = fn(ns)
            index["steps"][name] = _clean({k: v for k, v in res.items() if k != "failures"})
            failures.extend(_strip(f) | {"step": name} for f in res.get("failures", []))
            return True
        except (AnalysisError, UsageError) as exc:
            failures.append(_strip(_failure(name, exc)) | {"step": name})
            return False

    base = vars(args).copy()
    base["keep_going"] = True
    ns = lambda **kw: argparse.Namespace(**(base | kw))  # noqa: E731
    step("ingest", cmd_ingest, ns(out=str(out / "ingest")))
    step("svf", cmd_svf, ns(out=str(out / "svf")))
    fitted = step("fit", cmd_fit, ns(out=str(out / "fit")))
    methods = "MCP,KDE,AKDE" if fitted and (out / "fit" / "fits.json").exists() else "MCP,KDE"
    step("homerange", cmd_homerange, ns(out=str(out / "homerange"), methods=methods,
                                         fits=str(out / "fit")))
    if len(trajs) >= 2:
        step("interact", cmd_interact, ns(out=str(out / "interact")))
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*")
                   if p.is_file() and p.name != "index.json")
    index["files"] = files
    index["failures"] = failures
    _dump_json(out / "index.json", _clean(index))
    return {"files": len(files), "failures": failures}


# -- argument parsing -------------------------------------------------------------------

def _add_common(p, out=True):
    p.add_argument("input", help="collar CSV (animal_id,timestamp,lon,lat) or trajectories.json")
    if out:
        p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--keep-going", action="store_true",
                   help="record per-animal failures instead of stopping")


def _add_fit_opts(p):
    p.add_argument("--families", default="IID,OU,OUF")
    p.add_argument("--anisotropic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--min-pairs", type=int, default=30)
    p.add_argument("--max-lag-fraction", type=float, default=0.5)


def _add_hr_opts(p):
    p.add_argument("--levels", default="0.95,0.5")
    p.add_argument("--grid", type=int, default=256, help="density grid cells per side")


def _add_interact_opts(p):
    p.add_argument("--S", type=int, default=2500, help="Monte Carlo simulations per test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-max", type=float, default=None)
    p.add_argument("--min-months", type=int, default=5)
    p.add_argument("--core-level", type=float, default=0.5)
    p.add_argument("--kinds", default="L,J")
    p.add_argument("--reference", choices=("mean", "theoretical"), default="mean")
    p.add_argument("--intensity", choices=("refit", "shift"), default="refit",
                   help="refit the shifted animal's intensity per simulation, or carry the "
                        "observed fit along with the shift")
    p.add_argument("--window", default=None,
                   help="observation window x_min,x_max,y_min,y_max in meters "
                        "(default: bounding box of the pair plus 1%% per side)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rangeinteract", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file supplying option defaults")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and project a collar CSV")
    _add_common(p)

    p = sub.add_parser("simulate", help="simulate movement tracks as a collar CSV")
    p.add_argument("-o", "--output", required=True, help="CSV file to write")
    p.add_argument("--family", choices=[f.value for f in Family], default="OU")
    p.add_argument("--sill", type=float, default=1e6, help="total variance (m^2)")
    p.add_argument("--tau-p", type=float, default=DAY)
    p.add_argument("--tau-v", type=float, default=None)
    p.add_argument("--diffusion", type=float, default=1.0, help="Brownian rate (m^2/s)")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--dt", type=int, default=3600)
    p.add_argument("--t0", type=int, default=DEFAULT_T0)
    p.add_argument("--animals", type=int, default=1)
    p.add_argument("--spacing", type=float, default=0.0, help="x offset between animal centres (m)")
    p.add_argument("--id-prefix", default="sim")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("svf", help="empirical semivariance per animal")
    _add_common(p)
    p.add_argument("--max-lag-fraction", type=float, default=0.5)

    p = sub.add_parser("fit", help="fit and rank movement models")
    _add_common(p)
    _add_fit_opts(p)

    p = sub.add_parser("homerange", help="MCP / KDE / AKDE home ranges")
    _add_common(p)
    _add_hr_opts(p)
    p.add_argument("--methods", default="MCP,KDE")
    p.add_argument("--fits", default=None, help="directory written by 'fit' (needed for AKDE)")

    p = sub.add_parser("interact", help="pairwise interaction envelope tests")
    _add_common(p)
    _add_interact_opts(p)
    p.add_argument("--grid", type=int, default=256)

    p = sub.add_parser("report", help="run the whole pipeline into one directory")
    _add_common(p)
    _add_fit_opts(p)
    _add_hr_opts(p)
    _add_interact_opts(p)
    return parser


def read_config(path) -> dict:
    cfg = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _apply_config(parser, sub, cfg: dict) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        if key not in actions or key in ("help", "input"):
            raise UsageError(f"unknown config key {key!r} for this command")
        act = actions[key]
        if act.nargs == 0 or isinstance(act, argparse.BooleanOptionalAction):
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects a boolean")
            defaults[key] = low in ("true", "1", "yes")
        elif act.type is not None:
            try:
                defaults[key] = act.type(value)
            except ValueError:
                raise UsageError(f"bad value for {key!r}: {value!r}") from None
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)


COMMANDS = {
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "svf": cmd_svf,
    "fit": cmd_fit,
    "homerange": cmd_homerange,
    "interact": cmd_interact,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre, _ = parser.parse_known_args(argv)
        if pre.config:
            subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            _apply_config(parser, subparsers.choices[pre.command], read_config(pre.config))
        args = parser.parse_args(argv)
        result = COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"rangeinteract: usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"rangeinteract: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"rangeinteract: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"rangeinteract: usage error: {exc}", file=sys.stderr)
        return 1
    failures = result.get("failures") if isinstance(result, dict) else None
    if failures:
        print(f"rangeinteract: {len(failures)} item(s) failed; see outputs", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
