"""
CSV and JSON emission for simulation streams and reports.

IMU CSV layout, one row per sample::

    # se23preint imu v1; increments; dt=<s>
    t,gx,gy,gz,ax,ay,az,g1x,g1y,g1z,g2x,g2y,g2z,a1x,a1y,a1z,a2x,a2y,a2z

``t`` is the end of the sampling interval. With the ``increments`` flag the
``g``/``a`` columns are angle (rad) and velocity (m/s) increments; otherwise
they are rates (rad/s, m/s^2) and the sub-increment columns are absent.
Floats are written with ``repr``, the shortest string that reads back to
the same double, so files are diff-stable.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from ..increments import ImuSample

__all__ = [
    "IMU_COLUMNS",
    "SUB_COLUMNS",
    "fmt",
    "write_imu_csv",
    "read_imu_csv",
    "write_truth_csv",
    "dump_json",
]

IMU_COLUMNS = ["t", "gx", "gy", "gz", "ax", "ay", "az"]
SUB_COLUMNS = [f"{q}{k}{c}" for q, k in (("g", 1), ("g", 2), ("a", 1), ("a", 2)) for c in "xyz"]
_HEADER_TAG = "# se23preint imu v1"


def fmt(x):
    return repr(float(x))


def write_imu_csv(path, samples, t0=0.0):
    samples = list(samples)
    increments = all(s.is_increment for s in samples)
    subs = increments and all(s.sub_increments is not None for s in samples)
    dts = {s.dt for s in samples}
    flags = ["increments" if increments else "rates"]
    if len(dts) == 1:
        flags.append(f"dt={fmt(next(iter(dts)))}")
    with open(path, "w", newline="") as fh:
        fh.write(f"{_HEADER_TAG}; {'; '.join(flags)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IMU_COLUMNS + (SUB_COLUMNS if subs else []))
        t = t0
        for k, s in enumerate(samples):
            t = t0 + (k + 1) * s.dt if len(dts) == 1 else t + s.dt
            if increments:
                row = [t, *s.gyro, *s.accel]
            else:
                w_, f_ = s.rates()
                row = [t, *w_, *f_]
            if subs:
                for part in s.sub_increments:
                    row.extend(part)
            w.writerow([fmt(x) for x in row])


def read_imu_csv(path, t0=0.0):
    """Samples back from :func:`write_imu_csv`.

    ``dt`` is the header value when the file declares one, else the spacing of ``t``.
    """
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(_HEADER_TAG):
            raise ValueError(f"{path}: not an IMU file (missing '{_HEADER_TAG}' comment line)")
        flags = [f.strip() for f in first[len(_HEADER_TAG):].split(";") if f.strip()]
        increments = "increments" in flags
        fixed_dt = next((float(f[3:]) for f in flags if f.startswith("dt=")), None)
        reader = csv.reader(fh)
        header = next(reader)
        if header[: len(IMU_COLUMNS)] != IMU_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        has_subs = header[len(IMU_COLUMNS):] == SUB_COLUMNS
        samples, t_prev = [], t0
        for row in reader:
            vals = [float(x) for x in row]
            t = vals[0]
            dt = fixed_dt if fixed_dt is not None else t - t_prev
            t_prev = t
            g, a = vals[1:4], vals[4:7]
            if has_subs:
                p = vals[7:19]
                samples.append(ImuSample(dt, g, a, True, (p[0:3], p[3:6], p[6:9], p[9:12])))
            else:
                samples.append(ImuSample(dt, g, a, increments))
        return samples


def write_truth_csv(path, states):
    """Navigation states as ``t, C (row-major), v, r[, lat, lon, h]``."""
    states = list(states)
    ned = states[0].variant.is_ned if states else False
    cols = ["t"] + [f"c{i}{j}" for i in range(1, 4) for j in range(1, 4)] + ["vx", "vy", "vz", "rx", "ry", "rz"]
    if ned:
        cols += ["lat", "lon", "h"]
    with open(path, "w", newline="") as fh:
        fh.write(f"# se23preint truth v1; variant={states[0].variant.value if states else ''}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for s in states:
            row = [s.epoch, *np.asarray(s.pose.C).ravel(), *s.pose.v, *s.pose.r]
            if ned:
                row += [s.geodetic.lat, s.geodetic.lon, s.geodetic.h]
            w.writerow([fmt(x) for x in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path=None):
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
