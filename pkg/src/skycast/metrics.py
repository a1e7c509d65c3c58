"""Forecast verification: RMSE, skill scores, temporal distortion, quantiles.

The temporal distortion index (TDI) aligns forecast and target with
dynamic time warping and measures how far the optimal path strays from
the diagonal. Vertex offsets i - j > 0 mean the forecast index runs
ahead of the target index it is matched to, i.e. the forecast reproduces
the target late; offsets are summed and normalized by (N-1)^2, the
offset sum of a path hugging one full edge of the lattice, so TDI is a
percentage of the maximum possible distortion.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, JoinError, ShapeError

_STEPS = ((1, 1), (1, 0), (0, 1))   # backtracking preference order


@dataclass(frozen=True)
class WarpPath:
    """Monotone alignment path on the N x N lattice."""

    vertices: tuple
    cost: float = 0.0

    def __post_init__(self):
        v = self.vertices
        if not v or v[0] != (0, 0):
            raise DomainError("warp path must start at (0, 0)")
        if v[-1][0] != v[-1][1]:
            raise DomainError("warp path must end on the diagonal corner")
        for (i0, j0), (i1, j1) in zip(v, v[1:]):
            if (i1 - i0, j1 - j0) not in _STEPS:
                raise DomainError(f"illegal step {(i1 - i0, j1 - j0)}")


@dataclass(frozen=True)
class TdiResult:
    tdi: float      # percent
    adv: float      # percent
    late: float     # percent


@dataclass(frozen=True)
class EvalProtocol:
    """Windowed evaluation: `count` windows of `length` consecutive samples."""

    count: int = 200
    length: int = 100
    step_minutes: float = 2.0
    quantile: float = 0.95
    seed: int = 0


def _series_pair(pred, target, min_len):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.ndim != 1 or target.ndim != 1:
        raise ShapeError("series must be one-dimensional")
    if pred.shape != target.shape:
        raise ShapeError(f"length mismatch: {pred.shape[0]} vs {target.shape[0]}")
    if pred.shape[0] < min_len:
        raise DomainError(f"need at least {min_len} samples, got {pred.shape[0]}")
    return pred, target


def rmse(pred, target):
    pred, target = _series_pair(pred, target, 1)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def mae(pred, target):
    pred, target = _series_pair(pred, target, 1)
    return float(np.mean(np.abs(pred - target)))


def forecast_skill(err_forecast, err_reference):
    """(1 - err_f / err_ref) * 100; 100 is perfect, 0 matches the reference."""
    if err_reference <= 0:
        raise DomainError(f"reference error must be > 0, got {err_reference}")
    return (1.0 - err_forecast / err_reference) * 100.0


def quantile_abs_error(pred, target, q=0.95):
    """The ceil(q*N)-th smallest absolute error (lower empirical quantile)."""
    if not 0 < q < 1:
        raise DomainError(f"quantile must be in (0, 1), got {q}")
    pred, target = _series_pair(pred, target, 1)
    errors = np.abs(pred - target)
    n = errors.shape[0]
    # small slack so q*n that is an exact integer in real arithmetic does
    # not round up from float noise (0.95 * 60 -> 57.000000000000007)
    k = int(math.ceil(q * n - 1e-12))
    k = min(max(k, 1), n)
    return float(np.partition(errors, k - 1)[k - 1])


def dtw_align(pred, target):
    """Optimal monotone alignment minimizing the sum of |pred_i - target_j|.

    Steps are (1,0), (0,1), (1,1); the cost is accumulated over path
    vertices including both endpoints. Ties are broken during
    backtracking by preferring (1,1), then (1,0), then (0,1), which
    makes the returned path deterministic.
    """
    pred, target = _series_pair(pred, target, 2)
    n = pred.shape[0]
    d = np.abs(pred[:, None] - target[None, :])
    acc = np.empty((n, n))
    acc[0, :] = np.cumsum(d[0, :])
    acc[:, 0] = np.cumsum(d[:, 0])
    for i in range(1, n):
        row = acc[i]
        up = acc[i - 1]
        di = d[i]
        prev = row[0]
        for j in range(1, n):
            best = up[j - 1]         # diagonal
            if up[j] < best:
                best = up[j]
            if prev < best:
                best = prev
            prev = di[j] + best
            row[j] = prev
    i = j = n - 1
    vertices = [(i, j)]
    while i or j:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i -= 1
                j -= 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        vertices.append((i, j))
    vertices.reverse()
    return WarpPath(tuple(vertices), cost=float(acc[n - 1, n - 1]))


def tdi_from_path(path):
    """Distortion percentages of a given warp path."""
    n = path.vertices[-1][0] + 1
    denom = float((n - 1) ** 2)
    d_late = sum(max(i - j, 0) for i, j in path.vertices)
    d_adv = sum(max(j - i, 0) for i, j in path.vertices)
    late = 100.0 * d_late / denom
    adv = 100.0 * d_adv / denom
    return TdiResult(tdi=adv + late, adv=adv, late=late)


def tdi(pred, target):
    return tdi_from_path(dtw_align(pred, target))


@dataclass
class HorizonReport:
    horizon_min: float
    n: int
    rmse: float
    rmse_ref: float
    fs_percent: float
    quantile_abs: float
    tdi: float = math.nan
    tdi_adv: float = math.nan
    tdi_late: float = math.nan
    windows: int = 0

    def as_dict(self):
        return {
            "horizon_min": self.horizon_min,
            "n": self.n,
            "rmse": self.rmse,
            "rmse_ref": self.rmse_ref,
            "fs_percent": self.fs_percent,
            "quantile_abs": self.quantile_abs,
            "tdi": self.tdi,
            "tdi_adv": self.tdi_adv,
            "tdi_late": self.tdi_late,
            "windows": self.windows,
        }


def _window_starts(times, length, step_minutes):
    """Start indices of contiguous windows (no gap above the nominal step)."""
    n = len(times)
    if n < length:
        return []
    if length < 2:
        return list(range(n))
    gaps = np.array([(times[k + 1] - times[k]).total_seconds()
                     for k in range(n - 1)])
    max_gap = step_minutes * 60.0 + 1e-6
    ok = gaps <= max_gap
    starts = []
    run = 0   # contiguous ok-gap count ending just before index k
    for k in range(n - 1):
        run = run + 1 if ok[k] else 0
        if run >= length - 1:
            starts.append(k + 1 - (length - 1))
    return starts


def evaluate_run(table, reference, protocol=None):
    """Score a forecast table against truth, with a reference for skill.

    Both tables must carry identical (issue time, horizon) keys. Returns
    a report dict with one entry per horizon: RMSE, forecast skill
    versus the reference forecast, the q-quantile of absolute errors,
    and TDI averaged over `protocol.count` seeded random windows of
    `protocol.length` consecutive samples.
    """
    protocol = protocol or EvalProtocol()
    ref_map = {}
    for k, i in zip(reference.keys(), range(len(reference))):
        ref_map[k] = i
    missing = [k for k in table.keys() if k not in ref_map]
    if missing:
        raise JoinError(f"{len(missing)} keys missing from reference, "
                        f"first: {missing[:3]}")
    rng = np.random.default_rng(protocol.seed)
    horizons = []
    for h in table.horizons():
        sub = table.select_horizon(h).sorted_by_time()
        ref_idx = [ref_map[k] for k in sub.keys()]
        ref_pred = reference.y_pred[ref_idx]
        r = rmse(sub.y_pred, sub.y_true)
        r_ref = rmse(ref_pred, sub.y_true)
        rep = HorizonReport(
            horizon_min=h,
            n=len(sub),
            rmse=r,
            rmse_ref=r_ref,
            fs_percent=forecast_skill(r, r_ref),
            quantile_abs=quantile_abs_error(sub.y_pred, sub.y_true,
                                            protocol.quantile),
        )
        starts = _window_starts(sub.issue_time, protocol.length,
                                protocol.step_minutes)
        if starts:
            replace = len(starts) < protocol.count
            chosen = rng.choice(len(starts), size=protocol.count,
                                replace=replace)
            tds = []
            for c in chosen:
                s = starts[int(c)]
                sl = slice(s, s + protocol.length)
                tds.append(tdi(sub.y_pred[sl], sub.y_true[sl]))
            rep.tdi = float(np.mean([t.tdi for t in tds]))
            rep.tdi_adv = float(np.mean([t.adv for t in tds]))
            rep.tdi_late = float(np.mean([t.late for t in tds]))
            rep.windows = protocol.count
        horizons.append(rep)
    return {
        "protocol": {
            "count": protocol.count,
            "length": protocol.length,
            "step_minutes": protocol.step_minutes,
            "quantile": protocol.quantile,
            "seed": protocol.seed,
        },
        "horizons": [h.as_dict() for h in horizons],
    }


def report_to_csv(report):
    """Flatten an evaluate_run report into a per-horizon CSV string."""
    cols = ("horizon_min", "n", "rmse", "rmse_ref", "fs_percent",
            "quantile_abs", "tdi", "tdi_adv", "tdi_late", "windows")
    lines = [",".join(cols)]
    for h in report["horizons"]:
        lines.append(",".join(format(h[c], ".10g") if isinstance(h[c], float)
                              else str(h[c]) for c in cols))
    return "\n".join(lines) + "\n"
