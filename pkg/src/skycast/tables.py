"""Forecast tables: the CSV contract between producers and the evaluator.

Normative header:

    issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2[,aux_irradiance_wm2][,p000..p099]

The two bracketed groups are optional but all-or-nothing; when the
probability columns are present each row must sum to 1 within 1e-6.
"""

import math

import numpy as np

from .errors import SchemaError, ShapeError
from .images import atomic_write_text
from .timeutil import as_utc, format_iso, parse_iso

N_PROB_BINS = 100
PROB_COLUMNS = tuple(f"p{i:03d}" for i in range(N_PROB_BINS))
BASE_COLUMNS = ("issue_time_iso", "horizon_min", "y_true_wm2", "y_pred_wm2")
AUX_COLUMN = "aux_irradiance_wm2"
PROB_SUM_TOL = 1e-6


class ForecastTable:
    """Column-oriented forecast records.

    issue_time   list of UTC datetimes
    horizon_min  float array, minutes ahead of issue time
    y_true       measured irradiance at issue_time + horizon (W/m2)
    y_pred       forecast irradiance (W/m2)
    aux          optional extra irradiance channel (W/m2)
    probs        optional (n, 100) array of per-bin probabilities
    """

    def __init__(self, issue_time, horizon_min, y_true, y_pred,
                 aux=None, probs=None):
        self.issue_time = [as_utc(t) for t in issue_time]
        self.horizon_min = np.asarray(horizon_min, dtype=float)
        self.y_true = np.asarray(y_true, dtype=float)
        self.y_pred = np.asarray(y_pred, dtype=float)
        self.aux = None if aux is None else np.asarray(aux, dtype=float)
        self.probs = None if probs is None else np.asarray(probs, dtype=float)
        self.validate()

    def __len__(self):
        return len(self.issue_time)

    def validate(self):
        n = len(self.issue_time)
        for name in ("horizon_min", "y_true", "y_pred"):
            col = getattr(self, name)
            if col.shape != (n,):
                raise ShapeError(f"column {name} has shape {col.shape}, expected ({n},)")
        if self.aux is not None and self.aux.shape != (n,):
            raise ShapeError(f"aux column has shape {self.aux.shape}, expected ({n},)")
        if self.probs is not None:
            if self.probs.shape != (n, N_PROB_BINS):
                raise ShapeError(f"probs have shape {self.probs.shape}, "
                                 f"expected ({n}, {N_PROB_BINS})")
            sums = self.probs.sum(axis=1)
            bad = np.nonzero(np.abs(sums - 1.0) > PROB_SUM_TOL)[0]
            if bad.size:
                raise SchemaError(f"probability row {bad[0]} sums to "
                                  f"{sums[bad[0]]:.8f}, expected 1")
            if np.any(self.probs < 0):
                raise SchemaError("negative probability value")
        if not np.all(np.isfinite(self.horizon_min)):
            raise SchemaError("non-finite horizon")

    def keys(self):
        """(iso issue time, horizon) pairs identifying each row."""
        return [(format_iso(t), float(h))
                for t, h in zip(self.issue_time, self.horizon_min)]

    def horizons(self):
        return sorted(set(float(h) for h in self.horizon_min))

    def select_horizon(self, horizon):
        idx = np.nonzero(self.horizon_min == float(horizon))[0]
        return self.take(idx)

    def take(self, idx):
        idx = np.asarray(idx, dtype=int)
        return ForecastTable(
            [self.issue_time[i] for i in idx],
            self.horizon_min[idx],
            self.y_true[idx],
            self.y_pred[idx],
            aux=None if self.aux is None else self.aux[idx],
            probs=None if self.probs is None else self.probs[idx],
        )

    def sorted_by_time(self):
        order = sorted(range(len(self)), key=lambda i: self.issue_time[i])
        return self.take(order)

    def header(self):
        cols = list(BASE_COLUMNS)
        if self.aux is not None:
            cols.append(AUX_COLUMN)
        if self.probs is not None:
            cols.extend(PROB_COLUMNS)
        return cols

    def save(self, path):
        lines = [",".join(self.header())]
        for i, t in enumerate(self.issue_time):
            parts = [format_iso(t),
                     _fmt(self.horizon_min[i]),
                     _fmt(self.y_true[i]),
                     _fmt(self.y_pred[i])]
            if self.aux is not None:
                parts.append(_fmt(self.aux[i]))
            if self.probs is not None:
                parts.extend(_fmt(p) for p in self.probs[i])
            lines.append(",".join(parts))
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_csv(text)

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise SchemaError("empty forecast table", line=1)
        cols = [c.strip() for c in lines[0].split(",")]
        has_aux, has_probs = _check_header(cols)
        n_cols = len(cols)
        issue, horizon, y_true, y_pred, aux, probs = [], [], [], [], [], []
        for lineno, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != n_cols:
                raise SchemaError(f"expected {n_cols} fields, got {len(parts)}",
                                  line=lineno)
            try:
                issue.append(parse_iso(parts[0]))
            except ValueError as exc:
                raise SchemaError(f"bad timestamp {parts[0]!r}: {exc}",
                                  line=lineno) from None
            try:
                horizon.append(float(parts[1]))
                y_true.append(float(parts[2]))
                y_pred.append(float(parts[3]))
                k = 4
                if has_aux:
                    aux.append(float(parts[k]))
                    k += 1
                if has_probs:
                    row = [float(v) for v in parts[k:]]
                    s = math.fsum(row)
                    if abs(s - 1.0) > PROB_SUM_TOL:
                        raise SchemaError(f"probabilities sum to {s:.8f}, "
                                          "expected 1", line=lineno)
                    probs.append(row)
            except ValueError as exc:
                raise SchemaError(f"bad numeric field: {exc}", line=lineno) from None
        return cls(issue, horizon, y_true, y_pred,
                   aux=np.array(aux) if has_aux else None,
                   probs=np.array(probs) if has_probs else None)


def _check_header(cols):
    if tuple(cols[:4]) != BASE_COLUMNS:
        raise SchemaError(f"header must start with {','.join(BASE_COLUMNS)}; "
                          f"got {','.join(cols[:4])}", line=1)
    rest = cols[4:]
    has_aux = bool(rest) and rest[0] == AUX_COLUMN
    if has_aux:
        rest = rest[1:]
    if rest and tuple(rest) != PROB_COLUMNS:
        raise SchemaError("trailing columns must be exactly p000..p099", line=1)
    return has_aux, bool(rest)


def _fmt(x):
    return format(float(x), ".10g")
