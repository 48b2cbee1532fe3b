import csv
import io
import logging
import os
import shutil

import numpy as np

from nashseek.config import TRACE_HEADER, MEAN_HEADER, BIAS_VARIANCE_HEADER

logger = logging.getLogger(__name__)


def _fmt(value):
    # 17 significant digits round-trip doubles exactly
    return f"{value:.17g}"


def atomic_write_text(path, text):
    """Write to a temp file, fsync, then atomically replace the target."""
    temp_file = path + ".tmp"
    try:
        with open(temp_file, "w", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(temp_file, path)
    except OSError as e:
        logger.error(f"Could not write {path}: {e}")
        if os.path.exists(temp_file):
            try:
                os.remove(temp_file)
            except OSError:
                pass
        raise


def _backup_corrupt(path):
    backup_name = path + ".corrupt"
    try:
        shutil.copy(path, backup_name)
        logger.warning(f"Backed up corrupt file to {backup_name}")
    except OSError:
        pass


def _rows_to_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_trace_csv(path, run_id, trace):
    """One row per iteration: run_id,seed,iter,sq_error,gamma_n,ell_n,h_n,cum_evals."""
    rows = []
    has_error = len(trace.sq_error) == trace.iterations
    for k, (gamma_n, ell_n, h_n) in enumerate(trace.schedule_log):
        sq = _fmt(trace.sq_error[k]) if has_error else ""
        rows.append([run_id, trace.seed, k + 1, sq, _fmt(gamma_n), ell_n, _fmt(h_n), int(trace.cum_evals[k])])
    atomic_write_text(path, _rows_to_text(TRACE_HEADER, rows))


def read_trace_csv(path):
    """Parses a trace CSV back into columns (numeric columns as arrays)."""
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {header}")
        rows = list(reader)
    columns = {name: [row[k] for row in rows] for k, name in enumerate(TRACE_HEADER)}
    out = {"run_id": columns["run_id"]}
    for name in ("seed", "iter", "ell_n", "cum_evals"):
        out[name] = np.array([int(v) for v in columns[name]], dtype=np.int64)
    for name in ("sq_error", "gamma_n", "h_n"):
        out[name] = np.array([float(v) if v else np.nan for v in columns[name]])
    return out


def write_iterates_csv(path, trace):
    rows = [[n] + [_fmt(v) for v in x] for n, x in trace.iterates]
    d = len(trace.iterates[0][1]) if trace.iterates else 0
    header = ["iter"] + [f"x{k}" for k in range(d)]
    atomic_write_text(path, _rows_to_text(header, rows))


def write_mean_csv(path, aggregate):
    rows = [[int(n), _fmt(mu), _fmt(lo), _fmt(hi), aggregate.n_seeds]
            for n, mu, lo, hi in zip(aggregate.iters, aggregate.mean, aggregate.band_lo, aggregate.band_hi)]
    atomic_write_text(path, _rows_to_text(MEAN_HEADER, rows))


def read_mean_csv(path):
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != MEAN_HEADER:
            raise ValueError(f"{path}: unexpected mean-curve header {header}")
        rows = list(reader)
    return {
        "iter": np.array([int(r[0]) for r in rows], dtype=np.int64),
        "mean_sq_error": np.array([float(r[1]) for r in rows]),
        "band_lo": np.array([float(r[2]) for r in rows]),
        "band_hi": np.array([float(r[3]) for r in rows]),
        "n_seeds": int(rows[0][4]) if rows else 0,
    }


def write_reference(path, ref):
    """dim=d, then d values, then vi_residual=<value>."""
    lines = [f"dim={ref.x_star.size}"]
    lines += [_fmt(v) for v in ref.x_star]
    lines.append(f"vi_residual={_fmt(ref.vi_residual)}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    logger.info(f"Reference equilibrium written to {path}")


def read_reference(path):
    """
    Loads a reference file.

    Returns:
        (x_star ndarray, vi_residual float)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Reference file not found: {path}")
    with open(path, "r") as f:
        lines = [line.strip() for line in f if line.strip()]
    try:
        if not lines[0].startswith("dim="):
            raise ValueError("first line must be dim=<d>")
        d = int(lines[0].split("=", 1)[1])
        x_star = np.array([float(v) for v in lines[1:1 + d]])
        if x_star.size != d or not lines[1 + d].startswith("vi_residual="):
            raise ValueError("truncated reference file")
        residual = float(lines[1 + d].split("=", 1)[1])
    except (ValueError, IndexError) as e:
        logger.error(f"CORRUPTION DETECTED: could not parse reference {path}: {e}")
        _backup_corrupt(path)
        raise ValueError(f"Malformed reference file {path}: {e}")
    return x_star, residual


def write_summary(path, summary):
    atomic_write_text(path, summary.to_text())
    logger.info(f"Summary written to {path}")


def write_bias_variance_csv(path, rows):
    out = [[r["estimator"], _fmt(r["h"]), r["ell"], _fmt(r["bias_norm"]), _fmt(r["variance"]),
            _fmt(r["mse"]), r["replications"], _fmt(r["h_mse_optimal"])] for r in rows]
    atomic_write_text(path, _rows_to_text(BIAS_VARIANCE_HEADER, out))
    logger.info(f"Bias/variance grid written to {path}")
