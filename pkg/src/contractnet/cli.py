"""Command-line entry point.

Exit codes: 0 success, 1 infeasible or failed acceptance, 2 input error.
Every file-producing command writes ``manifest.json`` last into its output
directory; the default directory comes from ``CONTRACTNET_OUT``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certify import certify
from .errors import ContractNetError, InfeasibleRateError
from .halanay import HalanayParams, solve_rate
from .linalg import NormSpec
from .netmodel import verify_c1

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
DEFAULT_OUT = "contractnet-out"


class _Run:
    """Tracks outputs of one command and writes the manifest at the end."""

    def __init__(self, command: str, out_dir, inputs=(), seed=None):
        self.command = command
        self.out = Path(out_dir or os.environ.get("CONTRACTNET_OUT", DEFAULT_OUT))
        self.inputs = [str(p) for p in inputs]
        self.seed = seed
        self.outputs: list[str] = []
        self.start = time.perf_counter()
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_json(self, name: str, data) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(_finite(data), fh, indent=2, default=_jsonable, allow_nan=False)

    def finish(self, status: int) -> int:
        manifest = {
            "command": self.command, "inputs": self.inputs, "out_dir": str(self.out),
            "outputs": self.outputs, "seed": self.seed, "version": __version__,
            "wall_clock_s": time.perf_counter() - self.start, "exit_code": status,
        }
        tmp = self.out / "manifest.json.tmp"
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=2)
        os.replace(tmp, self.out / "manifest.json")
        return status


def _finite(o):
    """Replace NaN/inf by null so outputs stay strict JSON."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def cmd_rate(args) -> int:
    try:
        p = HalanayParams(args.sigma_bar, args.sigma_under, args.tau_max)
    except InfeasibleRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    lam = solve_rate(p)
    print(f"lambda = {lam:.12g}")
    print(f"residual = {p.residual(lam):.3e}")
    return EXIT_OK


def cmd_certify(args) -> int:
    from .specio import load_network, load_norm, load_transform
    net = load_network(args.network)
    T = load_transform(args.transform, net.N, net.block_dim)
    spec = load_norm(args.norm, net.N) if args.norm else NormSpec.uniform(net.N)
    run = _Run("certify", args.out_dir, [args.network, args.transform] + ([args.norm] if args.norm else []))
    c1 = verify_c1(net, np.linspace(0.0, 10.0, 11))
    cert = certify(net, T, spec)
    data = cert.to_dict()
    data["c1"] = {"passed": c1.passed, "max_delay_free": c1.max_delay_free, "max_delayed": c1.max_delayed}
    run.write_json("certificate.json", data)
    ok = cert.feasible and c1.passed
    print(f"feasible={ok} sigma_bar={cert.sigma_bar:.6g} sigma_under={cert.sigma_under:.6g} lambda={cert.lam:.6g}")
    if not c1.passed:
        print("C1 violated: couplings do not vanish on the desired solution")
    for v in cert.violations:
        print(f"  {v}")
    return run.finish(EXIT_OK if ok else EXIT_FAIL)


def cmd_synth(args) -> int:
    from .specio import load_json, search_from_dict
    from .synthesis import synthesize
    cfg = search_from_dict(load_json(args.search), args.search)
    run = _Run("synth", args.out_dir, [args.search])
    res = synthesize(cfg)
    run.write_json("gains.json", res.to_dict())
    if res.certificate is not None:
        run.write_json("certificate.json", res.certificate.to_dict())
    if res.success:
        g = res.gains
        print(f"gains k=({g.k0:.6g}, {g.k1:.6g}, {g.k2:.6g}) kt=({g.k0t:.6g}, {g.k1t:.6g}, {g.k2t:.6g}) "
              f"alpha={res.transform.alpha} beta={res.transform.beta}")
    for d in res.diagnostics:
        print(f"  {d}")
    return run.finish(EXIT_OK if res.success else EXIT_FAIL)


def cmd_simulate(args) -> int:
    from .simulator import error_metrics, simulate
    from .specio import load_json, load_network, load_norm, sim_from_dict
    net = load_network(args.network)
    sim_d = load_json(args.sim)
    cfg = sim_from_dict(sim_d, args.sim)
    spec = load_norm(args.norm, net.N) if args.norm else NormSpec.uniform(net.N)
    run = _Run("simulate", args.out_dir, [args.network, args.sim], cfg.seed)
    trace = simulate(net, cfg, spec)
    stride = int(sim_d.get("stride", 1))
    trace.write(run.path("trace.csv"), run.path("trace.json"), stride)
    m = error_metrics(trace, float(sim_d.get("tail", 1.0)), float(sim_d.get("threshold", 1e-3)))
    run.write_json("metrics.json", {**m.to_dict(), "initial_error": float(trace.error[0])})
    print(f"initial error {trace.error[0]:.6g}, tail sup {m.tail_sup:.6g}, final {m.final_error:.6g}")
    return run.finish(EXIT_OK)


def _load_gains(path):
    from .specio import load_json
    from .synthesis import GainVector
    d = load_json(path)
    src = d.get("gains", d)
    keys = ("k0", "k1", "k2", "k0t", "k1t", "k2t")
    if isinstance(src, dict) and all(k in src for k in keys):
        return GainVector(*[float(src[k]) for k in keys])
    if isinstance(src, list) and len(src) == 6:
        return GainVector.from_tuple(src)
    raise ContractNetError(f"{path}: gains must be six values or an object with {', '.join(keys)}")


def cmd_mtdc(args) -> int:
    from .mtdc import MtdcParams, run_case_study
    p = MtdcParams(terminals=args.terminals, horizon=args.horizon, dt=args.dt, seed=args.seed,
                   capacitance_mode=args.capacitance_mode, disturbance_on=not args.no_disturbance)
    gains = _load_gains(args.gains_file) if args.gains_file else None
    run = _Run("mtdc", args.out_dir, [args.gains_file] if args.gains_file else [], p.seed)
    rep = run_case_study(p, gains=gains)
    run.write_json("gains.json", {"source": rep.source, "gains": rep.gains.to_dict(),
                                  "transform": {"alpha": rep.transform.alpha, "beta": rep.transform.beta}})
    run.write_json("certificate.json", rep.certificate.to_dict())
    if rep.trace is not None:
        rep.trace.write(run.path("trace.csv"), run.path("trace.json"), args.stride)
    run.write_json("report.json", rep.to_dict())
    c = rep.certificate
    print(f"gains ({rep.source}): {rep.gains.as_tuple()}")
    print(f"certificate: feasible={c.feasible} sigma_bar={c.sigma_bar:.6g} "
          f"sigma_under={c.sigma_under:.6g} lambda={c.lam:.6g} eta={rep.eta_label}")
    for name, chk in rep.checks.items():
        print(f"  {name}: {chk['value']:.4g} (limit {chk['limit']:.4g}) {'PASS' if chk['passed'] else 'FAIL'}")
    return run.finish(EXIT_OK if rep.passed else EXIT_FAIL)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contractnet", description="Contraction certificates, gain synthesis and "
                                 "simulation for delayed networks with integral control.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rate", help="solve the delayed rate equation")
    r.add_argument("--sigma-bar", type=float, required=True)
    r.add_argument("--sigma-under", type=float, required=True)
    r.add_argument("--tau-max", type=float, required=True)
    r.set_defaults(func=cmd_rate)

    c = sub.add_parser("certify", help="check the contraction conditions")
    c.add_argument("network")
    c.add_argument("transform")
    c.add_argument("norm", nargs="?")
    c.add_argument("--out-dir")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("synth", help="search MTDC controller gains")
    s.add_argument("search")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("simulate", help="integrate a network")
    m.add_argument("network")
    m.add_argument("sim")
    m.add_argument("--norm")
    m.add_argument("--out-dir")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("mtdc", help="run the HVDC ring case study")
    t.add_argument("--terminals", type=int, default=30)
    t.add_argument("--horizon", type=float, default=40.0)
    t.add_argument("--dt", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=20240607)
    t.add_argument("--gains-file", help="skip synthesis and use these gains")
    t.add_argument("--capacitance-mode", choices=("normalized", "physical"), default="normalized")
    t.add_argument("--no-disturbance", action="store_true")
    t.add_argument("--stride", type=int, default=10, help="write every k-th mesh point to trace.csv")
    t.add_argument("--out-dir")
    t.set_defaults(func=cmd_mtdc)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ContractNetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
