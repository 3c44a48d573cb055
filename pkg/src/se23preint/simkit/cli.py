"""
``simkit`` command line.

    simkit simulate      --config run.toml --out DIR [--format csv|json]
    simkit preintegrate  --config run.toml --out DIR [--imu imu.csv] [--format csv|json]
    simkit compare       --config run.toml --out DIR [--format csv|json] [--timing]
    simkit verify        {group-axioms,jacobians,oracles,bias,monotonicity,all} [--inject-fault sign-flip]
    simkit monotonicity  --config run.toml --out DIR [--steps N]

Outputs depend only on the configuration (including its seed), so repeated
runs produce byte-identical files. Timing goes to the log on stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from ..bias_update import preintegrate_with_jacobian
from ..propagation import NoiseParams, PerturbationSide
from ..uncertainty_metrics import DOpt, criterion_value, verify_monotonicity
from .compare import covariance_chain, run_compare
from .config import load_config
from .io import dump_json, fmt, read_imu_csv, write_imu_csv, write_truth_csv
from .sensors import synthesize_imu
from .trajectories import truth_state
from .verify import FAULTS, SUITES, run_verify

log = logging.getLogger("simkit")


def _simulate(cfg):
    return synthesize_imu(cfg.build_trajectory(), cfg.sensor, cfg.seed)


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_simulate(args):
    cfg = load_config(args.config)
    stream = _simulate(cfg)
    truth = [truth_state(p, cfg.variant, cfg.earth) for p in stream.truth]
    if args.format == "csv":
        write_imu_csv(_out_path(args, "imu.csv"), stream.samples)
        write_truth_csv(_out_path(args, "truth.csv"), truth)
        bias_path = _out_path(args, "bias.csv")
        with open(bias_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "bgx", "bgy", "bgz", "bax", "bay", "baz"])
            for k, b in enumerate(stream.biases):
                w.writerow([fmt(stream.truth[k].t), *(fmt(x) for x in b)])
    else:
        doc = {
            "schema_version": 1,
            "trajectory": stream.trajectory.describe(),
            "variant": cfg.variant.value,
            "seed": cfg.seed,
            "samples": [
                {"dt": s.dt, "dtheta": s.gyro, "dvel": s.accel, "sub_increments": list(s.sub_increments)} for s in stream.samples
            ],
            "truth": [
                {"t": st.epoch, "C": st.pose.C, "v": st.pose.v, "r": st.pose.r} for st in truth
            ],
            "bias": stream.biases,
        }
        dump_json(doc, _out_path(args, "stream.json"))
    log.info("simulated %d samples", len(stream.samples))
    return 0


def _windows(samples, window):
    out, cur, t = [], [], 0.0
    for s in samples:
        cur.append(s)
        t += s.dt
        if t >= window - 1e-9:
            out.append(cur)
            cur, t = [], 0.0
    if cur:
        out.append(cur)
    return out


def cmd_preintegrate(args):
    cfg = load_config(args.config)
    samples = read_imu_csv(args.imu) if args.imu else _simulate(cfg).samples
    bias = cfg.sensor.initial_bias
    rows, t0 = [], 0.0
    for win in _windows(samples, cfg.window):
        U, J = preintegrate_with_jacobian(win, cfg.preintegration_scheme, bias)
        chain = covariance_chain(win, cfg.preintegration_scheme, cfg.noise, np.zeros((9, 9)), bias)
        S = chain[-1]
        rows.append({"t_i": t0, "t_j": t0 + U.dt, "U": U, "Sigma": S, "J": J})
        t0 += U.dt
    if args.format == "csv":
        with open(_out_path(args, "preintegrated.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["t_i", "t_j"] + [f"dc{i}{j}" for i in range(1, 4) for j in range(1, 4)]
            cols += ["dvx", "dvy", "dvz", "drx", "dry", "drz", "trace_sigma", "dopt_sigma"]
            w.writerow(cols)
            for r in rows:
                U = r["U"]
                vals = [r["t_i"], r["t_j"], *U.dC.ravel(), *U.dv, *U.dr, np.trace(r["Sigma"].matrix), criterion_value(DOpt, r["Sigma"])]
                w.writerow([fmt(x) for x in vals])
    else:
        doc = {
            "schema_version": 1,
            "scheme": cfg.preintegration_scheme.value,
            "bias": {"b_g": bias.b_g, "b_a": bias.b_a},
            "windows": [
                {
                    "t_i": r["t_i"],
                    "t_j": r["t_j"],
                    "dC": r["U"].dC,
                    "dv": r["U"].dv,
                    "dr": r["U"].dr,
                    "sigma": {"side": PerturbationSide.RIGHT_LOCAL.value, "matrix": r["Sigma"].matrix},
                    "J_bias": r["J"].matrix,
                }
                for r in rows
            ],
        }
        dump_json(doc, _out_path(args, "preintegrated.json"))
    return 0


def cmd_compare(args):
    cfg = load_config(args.config)
    stream = _simulate(cfg)
    report = run_compare(
        stream, cfg.schemes, cfg.variant, cfg.noise, cfg.initial_sigma, cfg.sensor.initial_bias, cfg.earth, cfg.seed
    )
    if args.format == "csv":
        with open(_out_path(args, "report.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scheme", "attitude_deg", "velocity_mps", "position_m", "trace_total", "monotonic"])
            for r in report.results:
                w.writerow(
                    [r.scheme.value, fmt(r.attitude_deg), fmt(r.velocity_mps), fmt(r.position_m), fmt(r.cov_trace["total"]), str(r.monotonicity["ok"]).lower()]
                )
    else:
        dump_json(report.to_dict(include_timing=args.timing), _out_path(args, "report.json"))
    return 0


def cmd_verify(args):
    reports = run_verify(args.what, args.inject_fault, args.seed)
    doc = {"schema_version": 1, "ok": all(r.ok for r in reports), "suites": [r.to_dict() for r in reports]}
    text = dump_json(doc)
    if args.out:
        dump_json(doc, _out_path(args, "verify.json"))
    sys.stdout.write(text)
    for r in reports:
        log.info("%s: %s%s", r.suite, "pass" if r.ok else "FAIL", "" if r.ok else f" ({', '.join(r.failed)})")
    return 0 if doc["ok"] else 1


def cmd_monotonicity(args):
    cfg = load_config(args.config)
    samples = _simulate(cfg).samples
    if args.steps is not None:
        samples = samples[: args.steps]
    else:
        samples = samples[: cfg.monotonicity_steps]
    noise = cfg.noise if (cfg.noise.gyro_psd or cfg.noise.accel_psd) else NoiseParams(1e-8, 1e-6)
    sig = np.repeat(np.asarray(cfg.initial_sigma, float) ** 2, 3)
    chain = covariance_chain(samples, cfg.preintegration_scheme, noise, np.diag(sig), cfg.sensor.initial_bias)
    report = verify_monotonicity(chain)
    if args.format == "csv":
        with open(_out_path(args, "monotonicity.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "log_det"])
            for k, ld in enumerate(report.log_dets):
                w.writerow([k, fmt(ld)])
    else:
        dump_json(report.to_dict(), _out_path(args, "monotonicity.json"))
    return 0 if report.ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="simkit", description="SE_2(3) preintegration simulation and verification harness")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and timing to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="TOML run configuration (defaults apply when omitted)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("simulate", help="synthesize an IMU stream with analytic truth")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("preintegrate", help="preintegrate windows of an IMU stream")
    common(sp)
    sp.add_argument("--imu", help="IMU CSV to read instead of simulating")
    sp.set_defaults(func=cmd_preintegrate)

    sp = sub.add_parser("compare", help="run every scheme against truth")
    common(sp)
    sp.add_argument("--timing", action="store_true", help="include wall-clock timing in the report (not reproducible)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", help="run a self-verification suite")
    sp.add_argument("what", choices=SUITES + ("all",))
    sp.add_argument("--inject-fault", choices=FAULTS, default=None, help="negate one analytic block (test mode)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="also write verify.json here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("monotonicity", help="check det(Sigma) along a covariance chain")
    common(sp)
    sp.add_argument("--steps", type=int, default=None)
    sp.set_defaults(func=cmd_monotonicity)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
