"""Timestamped irradiance series, CSV-backed (`timestamp_iso,ghi_wm2`)."""

import bisect

import numpy as np

from .errors import CoverageError, SchemaError
from .images import atomic_write_text
from .timeutil import as_utc, format_iso, parse_iso


class IrradianceSeries:
    """Strictly increasing timestamps with one value each."""

    def __init__(self, timestamps, values):
        self.timestamps = [as_utc(t) for t in timestamps]
        self.values = np.asarray(values, dtype=float)
        if len(self.timestamps) != len(self.values):
            raise SchemaError("timestamp and value counts differ")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if b <= a:
                raise SchemaError(f"timestamps not strictly increasing at "
                                  f"{format_iso(b)}")

    def __len__(self):
        return len(self.timestamps)

    def value_at(self, ts, tolerance_s=0.0):
        """Value at ts, or at the nearest timestamp within the tolerance."""
        hit = self.nearest(ts, tolerance_s)
        if hit is None:
            raise CoverageError(f"no sample within {tolerance_s:.0f} s of "
                                f"{format_iso(as_utc(ts))}")
        return hit[1]

    def nearest(self, ts, tolerance_s=0.0):
        """(timestamp, value) closest to ts within tolerance, else None.

        Ties (equidistant neighbors) resolve to the earlier sample.
        """
        if not self.timestamps:
            return None
        ts = as_utc(ts)
        k = bisect.bisect_left(self.timestamps, ts)
        best = None
        for i in (k - 1, k):
            if 0 <= i < len(self.timestamps):
                dt = abs((self.timestamps[i] - ts).total_seconds())
                if best is None or dt < best[0]:
                    best = (dt, i)
        if best is None or best[0] > tolerance_s:
            return None
        i = best[1]
        return self.timestamps[i], float(self.values[i])

    def to_csv(self):
        lines = ["timestamp_iso,ghi_wm2"]
        for t, v in zip(self.timestamps, self.values):
            lines.append(f"{format_iso(t)},{format(float(v), '.10g')}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split(",")[:2] != ["timestamp_iso", "ghi_wm2"]:
            raise SchemaError("expected header timestamp_iso,ghi_wm2", line=1)
        ts, vals = [], []
        for lineno, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != 2:
                raise SchemaError(f"expected 2 fields, got {len(parts)}",
                                  line=lineno)
            try:
                ts.append(parse_iso(parts[0]))
                vals.append(float(parts[1]))
            except ValueError as exc:
                raise SchemaError(str(exc), line=lineno) from None
        return cls(ts, vals)

    def save(self, path):
        atomic_write_text(path, self.to_csv())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv(fh.read())
