"""Command line harness: ``coulomblab <subcommand> [--config PATH] [--set k=v] [--out DIR]``.

Config files hold ``key = value`` lines grouped under ``[section]`` headers;
``#`` and ``;`` start comments. Keys may be given as ``section.key`` with
``--set``; a bare key is looked up in ``run`` and ``data``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import fields
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_types import ScenarioConfig

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVARIANT = 0, 1, 2, 3

DEFAULTS: Dict[str, Dict[str, str]] = {
    "run": {"d": "3", "dr": "0.005", "cfl": "1.0", "t_final": "40", "zeta": "0", "p": "3",
            "store_every": "50"},
    "data": {"kind": "gaussian_shell", "r_c": "2.0", "sigma": "0.2", "amp": "1.0", "vel_kind": "zero",
             "vel_r_c": "2.0", "vel_sigma": "0.2", "vel_amp": "0.0"},
    "diagnose": {"cone_apex": "14", "cone_t0": "10"},
    "transform": {"mode": "forward", "T0": "100", "T1": "400", "dr": "0.02", "taus": "1.5,2.0,2.5",
                  "times": "100,1000,10000"},
    "scatter": {"mode": "defocusing", "p": "5", "T": "80", "amp": "0.5", "kind": "focusing",
                "amplitudes": "1e-4,2e-4,4e-4", "dr": "0.005"},
    "harmonics": {"L": "4", "seed": "1", "r_c": "3.0", "width": "0.6"},
    "norms": {"T": "10,20,40,80"},
    "special": {"d": "3", "r_min": "0.1", "r_max": "20", "count": "40"},
}


class ConfigError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = "<config>"):
        super().__init__(f"{source}:{line}:{col}: {message}")


class Config(dict):
    """section -> {key: raw string}, remembering where each value came from."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.pos: Dict[Tuple[str, str], Tuple[str, int, int]] = {}

    def error(self, sec: str, key: str, message: str) -> ConfigError:
        src, line, col = self.pos.get((sec, key), ("<defaults>", 0, 0))
        return ConfigError(f"{sec}.{key}: {message}", line, col, src)


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse sectioned key=value text; errors carry line and column."""
    out = Config()
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        col = len(raw) - len(raw.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, col + len(stripped), source)
            name = stripped[1:-1].strip()
            if not name.isidentifier():
                raise ConfigError(f"bad section name {name!r}", lineno, col + 1, source)
            section = name
            out.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ConfigError("expected key = value", lineno, col, source)
        if section is None:
            raise ConfigError("key outside any [section]", lineno, col, source)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key.isidentifier():
            raise ConfigError(f"bad key {key!r}", lineno, col, source)
        value = value.split(" #")[0].strip()
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno, raw.index("=") + 2, source)
        out[section][key] = value
        out.pos[(section, key)] = (source, lineno, raw.index("=") + 2)
    return out


def apply_override(cfg: Config, item: str, index: int = 1) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} needs key=value", index, 1, "--set")
    key, _, value = item.partition("=")
    key, value = key.strip(), value.strip()
    if "." in key:
        sec, _, name = key.partition(".")
    else:
        sec = next((s for s in ("run", "data") if key in DEFAULTS[s]), None)
        if sec is None:
            raise ConfigError(f"unknown key {key!r}; use section.key", index, 1, "--set")
        name = key
    cfg.setdefault(sec, {})[name] = value
    cfg.pos[(sec, name)] = ("--set", index, item.index("=") + 2)


def merged_config(path: Optional[str], overrides: Sequence[str]) -> Config:
    cfg = Config({sec: dict(vals) for sec, vals in DEFAULTS.items()})
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(str(exc), 0, 0, path) from exc
        parsed = parse_config(text, path)
        for sec, vals in parsed.items():
            cfg.setdefault(sec, {}).update(vals)
        cfg.pos.update(parsed.pos)
    for i, item in enumerate(overrides, start=1):
        apply_override(cfg, item, i)
    return cfg


def _num(cfg, sec: str, key: str, kind=float):
    raw = cfg[sec][key]
    try:
        return kind(raw)
    except ValueError as exc:
        raise cfg.error(sec, key, f"cannot read {raw!r} as {kind.__name__}") from exc


def _floats(cfg, sec: str, key: str) -> List[float]:
    try:
        return [float(x) for x in cfg[sec][key].split(",") if x.strip()]
    except ValueError as exc:
        raise cfg.error(sec, key, "expected comma-separated numbers") from exc


_INT_FIELDS = ("d", "zeta", "store_every", "n")
_STR_FIELDS = ("data_kind", "vel_kind", "output")


def scenario(cfg: Config) -> ScenarioConfig:
    """ScenarioConfig from the [run] and [data] sections."""
    names = {f.name for f in fields(ScenarioConfig)}
    typed = {}
    for sec in ("run", "data"):
        for key, raw in cfg.get(sec, {}).items():
            target = "data_kind" if (sec, key) == ("data", "kind") else key
            if target not in names or target == "diagnostics":
                raise cfg.error(sec, key, "unknown key")
            if target in _STR_FIELDS:
                typed[target] = raw
                continue
            kind = int if target in _INT_FIELDS else float
            try:
                typed[target] = kind(raw)
            except ValueError as exc:
                raise cfg.error(sec, key, f"cannot read {raw!r} as {kind.__name__}") from exc
    return ScenarioConfig(**typed)


# ---------------------------------------------------------------- CSV

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, cfg: Config, columns: Sequence[str], rows: Sequence[Sequence], extra: Dict = None) -> None:
    lines = []
    for sec in sorted(cfg):
        for key in sorted(cfg[sec]):
            lines.append(f"# {sec}.{key}={cfg[sec][key]}")
    for key in sorted(extra or {}):
        lines.append(f"# {key}={_cell(extra[key])}")
    lines.append(",".join(columns))
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- subcommands

def _state_and_run(sc: ScenarioConfig):
    from .radial_evolver import DataSpec, evolve, make_state

    sc.validate()
    grid = sc.grid()
    spec = DataSpec(sc.data_kind, sc.r_c, sc.sigma, sc.amp, sc.vel_kind, sc.vel_r_c, sc.vel_sigma, sc.vel_amp)
    state = make_state(spec, grid, zeta=sc.zeta, p=sc.p)
    return spec, evolve(state, sc.t_final, sc.time_step(grid), store_every=sc.store_every)


EVOLVE_COLUMNS = ["t", "E", "E_minus", "E_plus", "Eprime_integral", "center_u0", "morawetz_accum",
                  "shell_frac_inner", "shell_frac_outer"]


def cmd_evolve(cfg, out: Path, args) -> int:
    from .energy_ledger import energy_series

    _, traj = _state_and_run(scenario(cfg))
    rows = [[r.t, r.E_total, r.E_minus, r.E_plus, r.Eprime_integral, r.center_u0, r.morawetz_accum,
             r.shell_frac_inner, r.shell_frac_outer] for r in energy_series(traj)]
    write_csv(out / "evolve.csv", cfg, EVOLVE_COLUMNS, rows)
    print(f"wrote {out / 'evolve.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_diagnose(cfg, out: Path, args) -> int:
    from .energy_ledger import (cone_law_terms, energy_series, half_energy_check, lemma_L_check,
                                morawetz_identity_check)

    sc = scenario(cfg)
    _, traj = _state_and_run(sc)
    rows = energy_series(traj)
    vals = []
    lhs, rhs = lemma_L_check(traj[-1])
    vals.append(("gradient_identity_defect", abs(lhs - rhs) / rhs if rhs else 0.0))
    vals.append(("morawetz_defect", morawetz_identity_check(traj, rows).defect))
    s, t0 = _num(cfg, "diagnose", "cone_apex"), _num(cfg, "diagnose", "cone_t0")
    if s <= traj.times[-1]:
        law = cone_law_terms(traj, s, t0)
        vals += [("cone_lhs", law.lhs), ("cone_morawetz", law.morawetz), ("cone_flux", law.flux),
                 ("cone_center", law.center), ("cone_residual", law.residual)]
    if sc.zeta == 0:
        he = half_energy_check(traj)
        vals.append(("kinetic_over_E", he.kinetic[-1] / he.energy if he.energy else 0.0))
    vals.append(("shell_frac_inner", rows[-1].shell_frac_inner))
    vals.append(("shell_frac_outer", rows[-1].shell_frac_outer))
    write_csv(out / "diagnose.csv", cfg, ["quantity", "value"], vals)
    for k, v in vals:
        print(f"{k}={_cell(v)}")
    return EXIT_OK


def cmd_transform(cfg, out: Path, args) -> int:
    from . import profile_transform as pt
    from .core_types import RadialGrid
    from .radial_evolver import DataSpec, make_state

    mode = cfg["transform"]["mode"]
    if mode == "forward":
        rep = pt.forward_transform_experiment(pt.reference_packet(), T0=_num(cfg, "transform", "T0"),
                                              T1=_num(cfg, "transform", "T1"), dr=_num(cfg, "transform", "dr"))
        row = rep.row()
        write_csv(out / "transform_forward.csv", cfg, list(row), [list(row.values())])
        print(f"ratio={_cell(rep.ratio)} duhamel_ok={rep.duhamel_ok}")
    elif mode == "fseries":
        rows = pt.f_norm_series(pt.reference_packet(), _floats(cfg, "transform", "times"),
                                dr=_num(cfg, "transform", "dr"))
        write_csv(out / "transform_fseries.csv", cfg, ["t", "f_norm"], rows,
                  {"slope": pt.loglog_slope(rows)})
        print(f"slope={_cell(pt.loglog_slope(rows))}")
    elif mode == "inverse":
        sc = scenario(cfg)
        spec = DataSpec(sc.data_kind, sc.r_c, sc.sigma, sc.amp)
        grid = RadialGrid.covering(sc.d, _num(cfg, "transform", "dr"), sc.t_final + spec.support()[1] + 1)
        res = pt.inverse_construction(make_state(spec, grid), _floats(cfg, "transform", "taus"),
                                      t_final=sc.t_final, allow_partial=True)
        rows = [[s.tau, s.y[0], s.y[-1], s.residual_l2, s.predicted_l2, s.mismatch_l2] for s in res]
        write_csv(out / "transform_inverse.csv", cfg, ["tau", "y_min", "y_max", "residual", "predicted",
                                                       "mismatch"], rows)
        for r in rows:
            print(",".join(_cell(v) for v in r))
    else:
        raise ConfigError(f"transform.mode must be forward, fseries or inverse, got {mode!r}", 0, 0)
    return EXIT_OK


def cmd_scatter(cfg, out: Path, args) -> int:
    from . import scattering_lab as sl
    from .radial_evolver import DataSpec

    sc = scenario(cfg)
    spec = DataSpec(sc.data_kind, sc.r_c, sc.sigma, _num(cfg, "scatter", "amp"))
    mode = cfg["scatter"]["mode"]
    p, T, dr = _num(cfg, "scatter", "p"), _num(cfg, "scatter", "T"), _num(cfg, "scatter", "dr")
    if mode == "defocusing":
        rep = sl.defocusing_scatter_experiment(spec, p=p, T=T, d=sc.d, dr=dr)
        rows = [[t, a, e] for t, a, e in zip(rep.times, rep.potential, rep.energy)]
        write_csv(out / "scatter_potential.csv", cfg, ["t", "potential", "E"], rows,
                  {"saturation": rep.saturation, "potential_ratio": rep.potential_ratio,
                   "energy_drift": rep.energy_drift, "scattering": rep.scattering})
        write_csv(out / "scatter_norms.csv", cfg, ["T", "norm"], list(zip(rep.norm_T, rep.norm_values)))
        print(f"scattering={rep.scattering} potential_ratio={_cell(rep.potential_ratio)} "
              f"saturation={_cell(rep.saturation)}")
    elif mode == "small":
        spec = DataSpec(sc.data_kind, sc.r_c, sc.sigma, sc.amp)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = sl.small_data_experiment(spec, p=p, f_kind=cfg["scatter"]["kind"],
                                           amplitudes=_floats(cfg, "scatter", "amplitudes"), T=T, d=sc.d, dr=dr)
        rows = [[r.amplitude, r.data_norm, r.norm, r.ratio, r.aborted] for r in rep.rows]
        write_csv(out / "scatter_small.csv", cfg, ["amplitude", "data_norm", "norm", "ratio", "aborted"], rows,
                  {"linear_ratio": rep.linear_ratio, "verdict": rep.verdict})
        print(f"verdict={rep.verdict} linear_gap={_cell(rep.linear_gap)}")
    else:
        raise ConfigError(f"scatter.mode must be defocusing or small, got {mode!r}", 0, 0)
    return EXIT_OK


def cmd_harmonics(cfg, out: Path, args) -> int:
    from . import harmonics as hm
    from .acceptance import _band_limited

    basis = hm.AngularBasis(_num(cfg, "harmonics", "L", int))
    seed = _num(cfg, "harmonics", "seed", int)
    rc, width = _num(cfg, "harmonics", "r_c"), _num(cfg, "harmonics", "width")
    u = _band_limited(basis, seed, rc, width)
    ut = _band_limited(basis, seed + 1, rc, width)
    res = hm.energy_identity_check(u, ut, basis)
    rows = [[l, m, e] for (l, m), e in zip(basis.labels, res.per_component)]
    write_csv(out / "harmonics.csv", cfg, ["ell", "m", "energy"], rows,
              {"total": res.total, "summed": res.summed, "defect": res.defect})
    print(f"total={_cell(res.total)} summed={_cell(res.summed)} defect={_cell(res.defect)}")
    return EXIT_OK


def _point_text(d: str, p: str, q: str) -> str:
    from . import norm_suite as ns

    def conv(x):
        return x if x.strip().lower() in ("inf", "infinity", "oo") else Fraction(x)

    try:
        pair = ns.PairPQ(conv(p), conv(q), int(d))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad exponent pair: {exc}", 0, 0, "--point") from exc
    label = ns.classify(pair)
    return "not allowed" if label == "not allowed" else f"allowed ({label})"


def cmd_norms(cfg, out: Path, args) -> int:
    from . import norm_suite as ns

    if args.point:
        print(_point_text(*args.point))
        return EXIT_OK
    sc = scenario(cfg)
    table = []
    for label, pair in ns.vertices(sc.d).items():
        p, q = pair.as_floats()
        table.append([label, _cell(p), _cell(q), ns.classify(pair)])
    write_csv(out / "norms_table.csv", cfg, ["vertex", "p", "q", "status"], table)
    _, traj = _state_and_run(sc)
    T_list = [t for t in _floats(cfg, "norms", "T") if t <= traj.times[-1] + 1e-9]
    rows = []
    for label, pair in ns.vertices(sc.d).items():
        if ns.classify(pair) == "not allowed":
            continue
        for T, val in zip(T_list, ns.lpq_partial_norms(traj, pair, T_list)):
            rows.append([label, T, val])
    write_csv(out / "norms_curves.csv", cfg, ["vertex", "T", "norm"], rows)
    for r in table:
        print(",".join(r))
    return EXIT_OK


def cmd_special(cfg, out: Path, args) -> int:
    from . import coulomb_special as cs

    d = _num(cfg, "special", "d", int)
    r = np.linspace(_num(cfg, "special", "r_min"), _num(cfg, "special", "r_max"),
                    _num(cfg, "special", "count", int))
    ph, dph = cs.phi(r, d, derivative=True)
    ps, dps = cs.psi(r, d, derivative=True)
    wr = ph * dps - dph * ps
    rows = list(zip(r, ph, dph, ps, dps, wr))
    write_csv(out / "special.csv", cfg, ["r", "phi", "phi_prime", "psi", "psi_prime", "wronskian"], rows)
    print(f"max |W + 1| = {_cell(float(np.max(np.abs(wr + 1))))}")
    return EXIT_OK


def cmd_accept(cfg, out: Path, args) -> int:
    from . import acceptance

    workers = max(1, int(os.environ.get("COULOMBLAB_THREADS", "1") or 1))
    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    outcomes = acceptance.run_all(quick=args.quick, numbers=numbers, workers=workers)
    for o in outcomes:
        print(o.line())
    passed, total = acceptance.summary(outcomes)
    print(f"{passed}/{total} criteria passed")
    rows = [[o.number, o.title, "PASS" if o.passed else "FAIL",
             ";".join(f"{k}={_cell(v)}" for k, v in o.measured.items())] for o in outcomes]
    write_csv(out / "accept.csv", cfg, ["criterion", "title", "status", "measured"], rows,
              {"quick": bool(args.quick)})
    return EXIT_OK if passed == total else EXIT_FAIL


COMMANDS = {"evolve": cmd_evolve, "diagnose": cmd_diagnose, "transform": cmd_transform, "scatter": cmd_scatter,
            "harmonics": cmd_harmonics, "norms": cmd_norms, "special": cmd_special, "accept": cmd_accept}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coulomblab", description="Radial Coulomb wave laboratory")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--out", default="out", metavar="DIR")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "norms":
            sp.add_argument("--point", nargs=3, metavar=("D", "P", "Q"))
        if name == "accept":
            sp.add_argument("--quick", action="store_true")
            sp.add_argument("--only", metavar="N[,N...]")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merged_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg, Path(args.out), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        msg = str(exc)
        print(msg if msg.startswith("invariant violated") else f"invariant violated: {msg}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
