"""Timestamp helpers.

All timestamps in the toolkit are timezone-aware UTC datetimes. Naive
datetimes read from files are assumed to be UTC.
"""

from datetime import datetime, timezone

_DAY_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)


def parse_iso(text):
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_iso(ts):
    """Render a UTC datetime as `YYYY-MM-DDTHH:MM:SS` (seconds precision)."""
    return as_utc(ts).strftime("%Y-%m-%dT%H:%M:%S")


def as_utc(ts):
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def minute_of_day(ts):
    """Minutes after UTC midnight, seconds truncated."""
    ts = as_utc(ts)
    return ts.hour * 60 + ts.minute


def day_number(ts):
    """Fractional days since 2000-01-01 UTC (continuous across years)."""
    return (as_utc(ts) - _DAY_EPOCH).total_seconds() / 86400.0


def day_of_year(ts):
    """Fractional day of year, 0-based (Jan 1 00:00 UTC is 0.0)."""
    ts = as_utc(ts)
    start = datetime(ts.year, 1, 1, tzinfo=timezone.utc)
    return (ts - start).total_seconds() / 86400.0


def parse_compact(stamp):
    """Parse `YYYYMMDDhhmm` or `YYYYMMDDhhmmss` file-name stamps."""
    if len(stamp) == 12:
        ts = datetime.strptime(stamp, "%Y%m%d%H%M")
    elif len(stamp) == 14:
        ts = datetime.strptime(stamp, "%Y%m%d%H%M%S")
    else:
        raise ValueError(f"unrecognized timestamp stamp {stamp!r}")
    return ts.replace(tzinfo=timezone.utc)


def format_compact(ts, seconds=False):
    fmt = "%Y%m%d%H%M%S" if seconds else "%Y%m%d%H%M"
    return as_utc(ts).strftime(fmt)
