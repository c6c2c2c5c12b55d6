"""Command line entry point: ``dqlab verify | compute | bench``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import verify as V

COMPUTE_FIELDS = ("hermitian_scalar", "hermitian_ricci", "J", "star", "trace_density")


@dataclass
class RunConfig:
    dim: int = 2
    grid_n: int = 32
    eps: float = 0.3
    seed: int = 0
    nu_order: int = 2
    weyl_degree_cap: int = 8
    fd_step: float = 1e-3
    checks: list | str = "all"
    report_path: str | None = None

    def validate(self):
        if self.dim not in (2, 4):
            raise ValueError("dim must be 2 or 4")
        if self.grid_n % 2:
            raise ValueError("grid_n must be even")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.weyl_degree_cap < 2 * self.nu_order + 2:
            raise ValueError("weyl_degree_cap must be >= 2*nu_order + 2")
        if self.checks != "all":
            if not isinstance(self.checks, list):
                raise ValueError("checks must be 'all' or a list of names")
            unknown = [c for c in self.checks if c not in V.REGISTRY]
            if unknown:
                raise ValueError(f"unknown checks: {unknown}")
        self.check_config()
        return self

    def check_config(self) -> V.CheckConfig:
        return V.CheckConfig(self.dim, self.grid_n, self.eps, self.seed, self.nu_order, self.weyl_degree_cap,
                             self.fd_step)

    def check_names(self) -> list[str]:
        return V.check_names(self.dim) if self.checks == "all" else list(self.checks)

    @classmethod
    def from_sources(cls, config_path: str | None, overrides: dict) -> RunConfig:
        data = {}
        if config_path:
            with open(config_path) as fh:
                data = json.load(fh)
            if not isinstance(data, dict):
                raise ValueError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data).validate()


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file mirroring RunConfig; flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--grid", dest="grid_n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--nu-order", dest="nu_order", type=int)
    p.add_argument("--cap", dest="weyl_degree_cap", type=int)
    p.add_argument("--fd-step", dest="fd_step", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dqlab", description="Numerical checks for Fedosov star products on tori")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run named checks and write a JSON report")
    _add_common(v)
    v.add_argument("--check", dest="checks", action="append", help="check name (repeatable); default all")
    v.add_argument("--report", dest="report_path")
    v.add_argument("--list", action="store_true", help="list registered checks and exit")
    c = sub.add_parser("compute", help="dump a field on the grid as CSV")
    _add_common(c)
    c.add_argument("--field", required=True, choices=COMPUTE_FIELDS)
    c.add_argument("--component", default=None, help="tensor component, e.g. 0,1")
    c.add_argument("--order", type=int, default=1, help="nu-order for star / trace_density")
    c.add_argument("--out", default="-")
    b = sub.add_parser("bench", help="per-module timings")
    _add_common(b)
    return ap


def _overrides(ns) -> dict:
    keys = ("dim", "grid_n", "eps", "seed", "nu_order", "weyl_degree_cap", "fd_step", "checks", "report_path")
    return {k: getattr(ns, k, None) for k in keys}


def cmd_verify(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    names = cfg.check_names()
    results = V.run_suite(cfg.check_config(), names)
    rep = V.report(cfg.check_config(), results, {"checks": cfg.checks, "report_path": cfg.report_path})
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: residual {r.residual:.3e} (tol {r.tolerance:.1e})", file=out)
    if cfg.report_path:
        V.write_report(cfg.report_path, rep)
    else:
        json.dump(rep, out, indent=2, sort_keys=True)
        out.write("\n")
    return 0 if all(r.passed for r in results) else 1


def compute_field(cfg: RunConfig, name: str, component=None, order: int = 1) -> np.ndarray:
    cc = cfg.check_config()
    if name in ("star", "trace_density") and cfg.dim != 2:
        raise ValueError(f"{name} is available for dim 2 only")
    cs = cc.structure()
    if name == "hermitian_scalar":
        return cs.hermitian_scalar
    if name in ("hermitian_ricci", "J"):
        T = cs.hermitian_ricci if name == "hermitian_ricci" else cs.J
        comp = tuple(component) if component is not None else (0, 1)
        return T[(...,) + comp]
    from .fedosov import build_fedosov
    fd = build_fedosov(cs, cfg.weyl_degree_cap)
    if name == "star":
        s = fd.star(cc.field(1), cc.field(2), max(order, 0))
        return s[order]
    from .moment import trace_density
    td = trace_density(fd, max(order, 1), seed=cfg.seed, holdout=0)
    return td[order]


def write_csv(grid, values: np.ndarray, fh):
    """Header row: x-coordinates along one axis; then samples row-major, one row per last-axis line."""
    w = csv.writer(fh)
    x = np.arange(grid.n) * (2 * np.pi / grid.n)
    w.writerow([repr(float(v)) for v in x])
    for row in values.reshape(-1, grid.n):
        w.writerow([repr(float(v)) for v in row])


def cmd_compute(cfg: RunConfig, ns, out=None) -> int:
    out = out or sys.stdout
    comp = None
    if ns.component:
        comp = tuple(int(c) for c in ns.component.split(","))
        if any(c < 0 or c >= cfg.dim for c in comp) or len(comp) != 2:
            raise ValueError("component must be two indices in range")
    vals = compute_field(cfg, ns.field, comp, ns.order)
    grid = cfg.check_config().grid
    if ns.out == "-":
        write_csv(grid, vals, out)
    else:
        with open(ns.out, "w", newline="") as fh:
            write_csv(grid, vals, fh)
    return 0


def cmd_bench(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    from .fedosov import build_fedosov
    from .moment import trace_density
    from .weyl import quadratic_y

    cc = cfg.check_config()
    grid = cc.grid
    times = {}

    def tick(name, fn):
        t = time.perf_counter()
        res = fn()
        times[name] = round((time.perf_counter() - t) * 1e3, 3)
        return res

    F = cc.field(1)
    tick("fields.grad", lambda: grid.grad(F))
    cs = tick("geometry.structure", lambda: cc.structure())
    tick("geometry.hermitian_scalar", lambda: cs.hermitian_scalar)
    M = np.broadcast_to(np.eye(cfg.dim), grid.shape + (cfg.dim, cfg.dim)) * F[..., None, None]
    q = quadratic_y(grid, cfg.weyl_degree_cap, M)
    tick("weyl.product", lambda: q.product(q))
    if cfg.dim == 2:
        fd = tick("fedosov.build", lambda: build_fedosov(cs, cfg.weyl_degree_cap))
        tick("fedosov.Q", lambda: fd.Q(F))
        tick("moment.trace_density", lambda: trace_density(fd, cfg.nu_order, seed=cfg.seed, holdout=0))
    json.dump({"config": asdict(cfg), "timings_ms": times}, out, indent=2, sort_keys=True)
    out.write("\n")
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command == "verify" and ns.list:
        for n, c in V.REGISTRY.items():
            print(f"{n}\tdims={','.join(map(str, c.dims))}\ttol={c.tolerance:g}\t{c.anchor}")
        return 0
    try:
        cfg = RunConfig.from_sources(ns.config, _overrides(ns))
        if ns.command == "verify":
            unsupported = [n for n in cfg.check_names() if cfg.dim not in V.REGISTRY[n].dims]
            if unsupported:
                raise ValueError(f"checks {unsupported} do not support dim {cfg.dim}")
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"dqlab: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        if ns.command == "verify":
            return cmd_verify(cfg)
        if ns.command == "compute":
            return cmd_compute(cfg, ns)
        return cmd_bench(cfg)
    except ValueError as exc:
        print(f"dqlab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
