"""Command-line driver.

Configuration is a flat ``key = value`` file (``#`` starts a comment); any
key can be overridden by an environment variable ``AFFINE_HUSIMI_<KEY>``.
Outputs are tab-separated tables with ``#`` header lines, read back by
:func:`read_table`.

Exit codes: 0 success, 2 configuration error, 3 numerical gate failure,
4 internal error.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .affine import PhasePoint, quantize_kernel, symbol_of
from .core import (
    AccuracyError,
    AffineSymbol,
    HalfLineFunction,
    make_log_grid,
    phase_window,
)
from .evolution import CONVENTIONS, KernelWindow, PropagationPlan, conservation, verify_evolution
from .mellin import contour_for_hbar, default_contour, symbol_mellin
from .phase import (
    HusimiEvaluator,
    affine_wigner,
    coherent_values,
    husimi_from_mellin,
    husimi_pure,
    identity_resolution_defect,
)

ENV_PREFIX = "AFFINE_HUSIMI_"

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_INTERNAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class RunConfig:
    hbar: float = 1.0
    # position grid
    x_min: float = 1e-4
    x_max: float = 40.0
    n: int = 2048
    # phase window
    a_min: float = 0.1
    a_max: float = 10.0
    n_a: int = 256
    b_min: float = -12.0
    b_max: float = 12.0
    n_b: int = 512
    # Mellin contour; tau_max <= 0 picks it from the gamma-factor decay
    tau_max: float = 60.0
    m: int = 1201
    # state family: coherent | monomial | superposition
    state: str = "coherent"
    state_a: float = 1.0
    state_b: float = 0.0
    state_k: float = 2.0
    state_c: float = 1.0
    state_points: str = "1:0,2:1"
    # separable symbol amp * f(a) * g(b)
    symbol_f: str = "exp"
    symbol_g: str = "gaussian"
    symbol_amp: float = 5.0
    symbol_c: float = 1.0
    symbol_width_a: float = 2.0
    symbol_b0: float = 0.0
    symbol_sigma: float = 1.0
    symbol_width_b: float = 4.0
    sym_a_min: float = 0.02
    sym_a_max: float = 50.0
    sym_n_a: int = 256
    sym_b_min: float = -12.0
    sym_b_max: float = 12.0
    sym_n_b: int = 512
    # husimi source: state | symbol
    source: str = "state"
    # identity-resolution window for verify
    id_a_min: float = 5e-4
    id_a_max: float = 1e3
    id_n_a: int = 320
    id_b_max: float = 160.0
    id_n_b: int = 3201
    id_n: int = 8192
    # Husimi rate kernel window
    kernel_a_min: float = 0.002
    kernel_a_max: float = 200.0
    kernel_n_a: int = 128
    kernel_b_span: float = 40.0
    # evolution
    t_max: float = 5.0
    n_t: int = 6
    probes: int = 25
    dump_stride: int = 8
    out: str = "out"

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def validate(self):
        pos = ["hbar", "x_min", "x_max", "a_min", "a_max", "sym_a_min", "sym_a_max", "id_a_min", "id_a_max",
               "kernel_a_min", "kernel_a_max", "state_a", "state_c", "symbol_c", "symbol_sigma",
               "symbol_width_a", "symbol_width_b", "id_b_max", "kernel_b_span"]
        for k in pos:
            if not getattr(self, k) > 0:
                raise ConfigError(f"{k} must be positive")
        for lo, hi in [("x_min", "x_max"), ("a_min", "a_max"), ("b_min", "b_max"), ("sym_a_min", "sym_a_max"),
                       ("sym_b_min", "sym_b_max"), ("id_a_min", "id_a_max"), ("kernel_a_min", "kernel_a_max")]:
            if not getattr(self, lo) < getattr(self, hi):
                raise ConfigError(f"{lo} must be below {hi}")
        for k in ["n", "n_a", "n_b", "sym_n_a", "sym_n_b", "id_n_a", "id_n_b", "id_n", "kernel_n_a", "m"]:
            if getattr(self, k) < 3:
                raise ConfigError(f"{k} must be at least 3")
        for k in ["n_t", "probes", "dump_stride"]:
            if getattr(self, k) < 1:
                raise ConfigError(f"{k} must be at least 1")
        if self.t_max < 0:
            raise ConfigError("t_max must be non-negative")
        choices = {"state": ("coherent", "monomial", "superposition"), "symbol_f": ("exp", "bump"),
                   "symbol_g": ("gaussian", "bump"), "source": ("state", "symbol")}
        for k, allowed in choices.items():
            if getattr(self, k) not in allowed:
                raise ConfigError(f"{k} must be one of {', '.join(allowed)}")
        if self.state == "superposition":
            _parse_points(self.state_points)


def _convert(name: str, raw: str):
    field = {f.name: f for f in dataclasses.fields(RunConfig)}[name]
    kind = field.type if isinstance(field.type, type) else {"float": float, "int": int, "str": str}[field.type]
    try:
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    known = set(RunConfig.keys())
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(path=None, env=None, overrides=None) -> RunConfig:
    """Defaults, then the config file, then environment variables, then ``overrides``."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}") from None
        values.update(parse_config_text(text))
    env = os.environ if env is None else env
    for key in RunConfig.keys():
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _convert(key, raw)
    values.update(overrides or {})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# table format


def _fmt(v) -> str:
    return repr(float(v))


def _meta_str(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, (tuple, list)):
        return " ".join(_meta_str(u) for u in v)
    return repr(v) if isinstance(v, float) else str(v)


def write_table(path, columns, data, meta: dict):
    """Tab-separated table; ``meta`` entries become ``# key: value`` header lines."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError("data must have one column per name")
    lines = [f"# {k}: {_meta_str(v)}" for k, v in meta.items()]
    lines.append("# columns: " + "\t".join(columns))
    lines.extend("\t".join(_fmt(v) for v in row) for row in data)
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path):
    """Inverse of :func:`write_table`: returns ``(meta, columns, data)``."""
    meta, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# columns: "):
            columns = line[len("# columns: "):].split("\t")
        elif line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = val
        elif line.strip():
            rows.append([float(v) for v in line.split("\t")])
    if columns is None:
        raise ValueError(f"{path}: missing columns header")
    data = np.array(rows, dtype=float).reshape(-1, len(columns))
    return meta, columns, data


def _config_meta(cfg: RunConfig, command: str) -> dict:
    meta = {"command": command, "version": __version__}
    meta.update({f"config.{k}": getattr(cfg, k) for k in RunConfig.keys() if k != "out"})
    return meta


def _conventions_meta() -> dict:
    return {f"convention.{k}": v for k, v in CONVENTIONS.items()}


def _field_rows(a, b, values):
    A, B = np.meshgrid(a, b, indexing="ij")
    cols = [A.ravel(), B.ravel()]
    for v in values:
        v = np.asarray(v)
        cols += [v.real.ravel(), v.imag.ravel()] if np.iscomplexobj(v) else [v.ravel()]
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# builders


def _parse_points(text: str):
    pts = []
    try:
        for item in text.split(","):
            a, b = item.split(":")
            pts.append(PhasePoint(float(a), float(b)))
    except (ValueError, TypeError):
        raise ConfigError(f"state_points: expected a:b pairs separated by commas, got {text!r}") from None
    if not pts:
        raise ConfigError("state_points is empty")
    return pts


def build_grid(cfg):
    return make_log_grid(cfg.x_min, cfg.x_max, cfg.n)


def build_window(cfg):
    return phase_window(cfg.a_min, cfg.a_max, cfg.n_a, cfg.b_min, cfg.b_max, cfg.n_b)


def build_contour(cfg):
    if cfg.tau_max <= 0:
        return contour_for_hbar(cfg.hbar)
    return default_contour(cfg.tau_max, 2 * cfg.tau_max / (cfg.m - 1))


def build_state(cfg, grid) -> HalfLineFunction:
    x = grid.x
    if cfg.state == "coherent":
        vals = coherent_values(PhasePoint(cfg.state_a, cfg.state_b), cfg.hbar, x)
    elif cfg.state == "monomial":
        vals = x**cfg.state_k * np.exp(-cfg.state_c * x)
    else:
        vals = sum(coherent_values(p, cfg.hbar, x) for p in _parse_points(cfg.state_points))
    return HalfLineFunction(grid, vals).normalized()


def _bump(t):
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1 - 1 / (1 - t[inside] ** 2))
    return out


def symbol_function(cfg):
    """``W(a, b) = amp * f(a) * g(b)`` for the configured families."""

    def f(a):
        if cfg.symbol_f == "exp":
            return np.exp(-cfg.symbol_c * (a + 1 / a - 2))
        return _bump(np.log(a) / cfg.symbol_width_a)

    def g(bb):
        if cfg.symbol_g == "gaussian":
            return np.exp(-((bb - cfg.symbol_b0) ** 2) / (2 * cfg.symbol_sigma**2))
        return _bump((bb - cfg.symbol_b0) / cfg.symbol_width_b)

    return lambda a, bb: cfg.symbol_amp * f(a) * g(bb)


def build_symbol(cfg) -> AffineSymbol:
    ag = make_log_grid(cfg.sym_a_min, cfg.sym_a_max, cfg.sym_n_a)
    b = np.linspace(cfg.sym_b_min, cfg.sym_b_max, cfg.sym_n_b)
    return AffineSymbol.from_callable(ag, b, symbol_function(cfg))


def probe_points(cfg, k: int):
    """``k`` deterministic probes on a grid around the state's scale."""
    side = math.ceil(math.sqrt(k))
    a = np.geomspace(0.5, 2.0, side) * (cfg.state_a if cfg.state == "coherent" else 1.0)
    b = np.linspace(-1.0, 1.2, side) + (cfg.state_b if cfg.state == "coherent" else 0.0)
    return [PhasePoint(float(ai), float(bi)) for ai in a for bi in b][:k]


# ---------------------------------------------------------------------------
# commands


class GateFailure(RuntimeError):
    pass


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_husimi(cfg: RunConfig) -> list[Path]:
    grid = build_grid(cfg)
    a, b = build_window(cfg)
    out = _out_dir(cfg)
    meta = _config_meta(cfg, "husimi") | _conventions_meta()
    if cfg.source == "state":
        psi = build_state(cfg, grid)
        field = husimi_pure(psi, a, b, cfg.hbar)
        i, k = np.unravel_index(np.argmax(field.values), field.values.shape)
        meta |= {"paths": "direct", "peak": f"{float(field.values[i, k])!r} at a={float(a.x[i])!r} b={float(b[k])!r}",
                 "window_mass": repr(field.mass(a.weights))}
        path = out / "husimi.tsv"
        write_table(path, ["a", "b", "direct"], _field_rows(a.x, b, [field.values]), meta)
        return [path]
    W = build_symbol(cfg)
    Wop = quantize_kernel(W, grid, cfg.hbar)
    direct = HusimiEvaluator(Wop, cfg.hbar)(a, b)
    mellin = husimi_from_mellin(symbol_mellin(W, build_contour(cfg)), a.x, b, cfg.hbar)
    diff = mellin.values - direct.values
    rel = float(np.abs(diff).max() / max(np.abs(direct.values).max(), 1e-300))
    meta |= {"paths": "direct mellin", "max_relative_difference": repr(rel),
             "window_mass_direct": repr(direct.mass(a.weights)), "window_mass_mellin": repr(mellin.mass(a.weights))}
    path = out / "husimi.tsv"
    write_table(path, ["a", "b", "direct", "mellin", "difference"],
                _field_rows(a.x, b, [direct.values, mellin.values, diff]), meta)
    if rel > 1e-3:
        raise GateFailure(f"husimi paths differ by {rel:.3e} (gate 1e-3)")
    return [path]


def cmd_wigner(cfg: RunConfig) -> list[Path]:
    grid = build_grid(cfg)
    a, b = build_window(cfg)
    psi = build_state(cfg, grid)
    W = affine_wigner(psi, a, b, cfg.hbar)
    total = W.integrate()
    nrm = psi.norm()
    meta = _config_meta(cfg, "wigner") | {
        "integral_da_db_over_a2": repr(complex(total)),
        "ratio_to_norm": repr(float(np.real(total)) / nrm),
        "ratio_to_norm_squared": repr(float(np.real(total)) / nrm**2),
    }
    path = _out_dir(cfg) / "wigner.tsv"
    write_table(path, ["a", "b", "re", "im"], _field_rows(a.x, b, [W.values]), meta)
    return [path]


def cmd_quantize(cfg: RunConfig) -> list[Path]:
    grid = build_grid(cfg)
    W = build_symbol(cfg)
    Wop = quantize_kernel(W, grid, cfg.hbar)
    out = _out_dir(cfg)
    s = cfg.dump_stride
    idx = np.arange(0, grid.n, s)
    X, Y = np.meshgrid(grid.x[idx], grid.x[idx], indexing="ij")
    E = Wop.entries[np.ix_(idx, idx)]
    kpath = out / "kernel.tsv"
    write_table(kpath, ["x", "y", "re", "im"],
                np.column_stack([X.ravel(), Y.ravel(), E.real.ravel(), E.imag.ravel()]),
                _config_meta(cfg, "quantize") | {"hermiticity_defect": repr(Wop.hermiticity_defect())})
    a, b = build_window(cfg)
    ia, ib = AffineSymbol(a, b, np.zeros((a.n, b.size))).inner_window()
    ai, bi = a.x[ia], b[ib]
    rec = symbol_of(Wop, ai, bi, cfg.hbar)
    ref = symbol_function(cfg)(ai[:, None], bi[None, :])
    err = np.abs(rec - ref)
    rel = float(err.max() / max(np.abs(ref).max(), 1e-300))
    spath = out / "roundtrip.tsv"
    write_table(spath, ["a", "b", "symbol", "recovered_re", "recovered_im", "abs_error"],
                _field_rows(ai, bi, [ref, rec, err]),
                _config_meta(cfg, "quantize") | {"sup_relative_error": repr(rel)})
    if rel > 1e-3:
        raise GateFailure(f"symbol round trip error {rel:.3e} (gate 1e-3)")
    return [kpath, spath]


def cmd_verify(cfg: RunConfig, probes: int | None = None) -> list[Path]:
    k = cfg.probes if probes is None else probes
    grid = build_grid(cfg)
    out = _out_dir(cfg)
    h = cfg.hbar
    results = []

    # resolution of identity on the verification window
    id_grid = make_log_grid(cfg.x_min, cfg.x_max, cfg.id_n)
    id_a = make_log_grid(cfg.id_a_min, cfg.id_a_max, cfg.id_n_a)
    id_b = np.linspace(-cfg.id_b_max, cfg.id_b_max, cfg.id_n_b)
    psi_id = build_state(cfg, id_grid)
    try:
        d = identity_resolution_defect(psi_id, id_a, id_b, h)
        results.append(("identity_resolution", d, 1e-3, ""))
    except AccuracyError as exc:
        results.append(("identity_resolution", math.nan, 1e-3, str(exc)))

    # Husimi from the Mellin spectrum against the direct definition
    W = build_symbol(cfg)
    Wop = quantize_kernel(W, grid, h)
    a, b = build_window(cfg)
    ia, ib = AffineSymbol(a, b, np.zeros((a.n, b.size))).inner_window()
    direct = HusimiEvaluator(Wop, h)(a.x[ia], b[ib])
    mellin = husimi_from_mellin(symbol_mellin(W, build_contour(cfg)), a.x[ia], b[ib], h)
    rel = float(np.abs(mellin.values - direct.values).max() / max(np.abs(direct.values).max(), 1e-300))
    results.append(("husimi_mellin_agreement", rel, 1e-3, ""))

    # Husimi rate three-way check
    psi0 = build_state(cfg, grid)
    window = KernelWindow(cfg.kernel_a_min, cfg.kernel_a_max, cfg.kernel_n_a, cfg.kernel_b_span)
    report = verify_evolution(W, psi0, probe_points(cfg, k), h, contour=contour_for_hbar(h), window=window, H=Wop)
    results.append(("rate_fd_vs_direct", report.max_fd_gap, report.fd_tol, ""))
    results.append(("rate_direct_vs_kernel", report.max_kernel_gap, report.kernel_tol, ""))
    errors = [f"({r.p.a},{r.p.b}) {r.error}" for r in report.probes if r.error]

    meta = _config_meta(cfg, "verify") | _conventions_meta()
    for key, val in report.diagnostics.items():
        meta[f"diagnostic.{key}"] = val
    if not report.kernel_passed:
        for name, res in report.variant_residuals().items():
            meta[f"variant.{name}"] = repr(res)
    if errors:
        meta["probe_errors"] = " | ".join(errors)
    rows = [[r.p.a, r.p.b, r.finite_difference, r.richardson, r.direct, r.kernel, r.fd_gap, r.kernel_gap,
             r.edge_fraction] for r in report.probes]
    rpath = out / "rates.tsv"
    write_table(rpath, ["a", "b", "finite_difference", "richardson", "direct", "kernel", "fd_gap", "kernel_gap",
                        "edge_fraction"], rows, meta)

    summary = {}
    failed = [name for name, val, tol, _ in results if not (val <= tol)] + (["probe_errors"] if errors else [])
    for name, val, tol, note in results:
        status = "pass" if val <= tol else "fail"
        summary[f"check.{name}"] = f"{status} value={val!r} tol={tol!r}" + (f" note={note}" if note else "")
    summary["status"] = "fail" if failed else "pass"
    spath = out / "verify.tsv"
    write_table(spath, ["passed"], [[0.0 if failed else 1.0]], _config_meta(cfg, "verify") | summary)
    if failed:
        raise GateFailure("verify failed: " + ", ".join(failed))
    return [rpath, spath]


def cmd_evolve(cfg: RunConfig) -> list[Path]:
    grid = build_grid(cfg)
    W = build_symbol(cfg)
    H = quantize_kernel(W, grid, cfg.hbar)
    plan = PropagationPlan(H, cfg.hbar, (0.0, max(cfg.t_max, 1e-12)))
    psi0 = build_state(cfg, grid)
    a, b = build_window(cfg)
    times = np.linspace(0.0, cfg.t_max, cfg.n_t)
    cons = conservation(plan, psi0, times, a, b)
    rows = []
    for t in times:
        field = husimi_pure(plan.propagate(psi0, t), a, b, cfg.hbar)
        block = _field_rows(a.x, b, [field.values])
        rows.append(np.column_stack([np.full(block.shape[0], t), block]))
    meta = _config_meta(cfg, "evolve") | {
        "norm_drift": repr(cons.norm_drift),
        "energy_drift": repr(cons.energy_drift),
        "window_mass_drift": repr(cons.mass_drift),
        "window_mass": " ".join(repr(float(v)) for v in cons.mass),
    }
    path = _out_dir(cfg) / "evolve.tsv"
    write_table(path, ["t", "a", "b", "husimi"], np.vstack(rows), meta)
    if cons.norm_drift > 1e-8 or cons.energy_drift > 1e-8:
        raise GateFailure(f"norm drift {cons.norm_drift:.2e}, energy drift {cons.energy_drift:.2e} (gate 1e-8)")
    return [path]


COMMANDS = {
    "husimi": cmd_husimi,
    "wigner": cmd_wigner,
    "quantize": cmd_quantize,
    "verify": cmd_verify,
    "evolve": cmd_evolve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affine-husimi", description="Affine Wigner and wavelet-Husimi transforms.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory (overrides the config key)")
        p.add_argument("--probes", type=int, help="number of probe points (verify)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        overrides = {"out": args.out} if args.out else {}
        if args.probes is not None:
            overrides["probes"] = args.probes
        cfg = load_config(args.config, overrides=overrides)
    except (ConfigError, TypeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = COMMANDS[args.command](cfg)
    except GateFailure as exc:
        print(f"error: gate: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (AccuracyError, ValueError) as exc:
        kind = "gate" if isinstance(exc, AccuracyError) else "config"
        print(f"error: {kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GATE if kind == "gate" else EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: internal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for p in paths:
        print(p)
    return EXIT_OK
