"""Loading, writing and simulating right-censored survival data."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .moments import SurvivalData


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class RawDataset:
    times: np.ndarray
    events: np.ndarray  # 1 exact, 0 right-censored
    name: str = ""
    unit: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        e = np.asarray(self.events, dtype=np.int64)
        if t.shape != e.shape or t.ndim != 1:
            raise DataError("times and events must be 1-d and of equal length")
        if np.any(~np.isfinite(t)) or np.any(t <= 0):
            raise DataError("times must be finite and positive")
        if np.any((e != 0) & (e != 1)):
            raise DataError("event flags must be 0 or 1")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e)

    def __len__(self):
        return self.times.size

    @property
    def n_censored(self) -> int:
        return int(np.sum(self.events == 0))

    def to_survival(self) -> SurvivalData:
        if len(self) == 0:
            raise DataError(f"dataset {self.name or '<unnamed>'} is empty")
        return SurvivalData.from_arrays(self.times, self.events.astype(bool))


def load_csv(path, name: str | None = None) -> RawDataset:
    """Read a ``time,event`` CSV; errors name the offending line."""
    times, events = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["time", "event"]:
            raise DataError(f"{path}: expected header 'time,event', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}, line {lineno}: expected 2 fields, got {len(row)}")
            try:
                t = float(row[0])
                e = int(row[1])
            except ValueError:
                raise DataError(f"{path}, line {lineno}: cannot parse {row!r}") from None
            if not np.isfinite(t) or t <= 0:
                raise DataError(f"{path}, line {lineno}: time must be positive, got {row[0].strip()}")
            if e not in (0, 1):
                raise DataError(f"{path}, line {lineno}: event must be 0 or 1, got {row[1].strip()}")
            times.append(t)
            events.append(e)
    return RawDataset(np.array(times), np.array(events, dtype=np.int64), name or str(path))


def write_csv(path, ds: RawDataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "event"])
        for t, e in zip(ds.times, ds.events):
            w.writerow([repr(float(t)), int(e)])


_TREATMENT = [(6, 1), (6, 1), (6, 1), (6, 0), (7, 1), (9, 0), (10, 1), (10, 0), (11, 1), (13, 1),
              (16, 1), (17, 0), (19, 0), (20, 0), (22, 1), (23, 1), (25, 0), (32, 0), (32, 0),
              (34, 0), (35, 0)]
_PLACEBO = [1, 1, 2, 2, 3, 4, 4, 5, 5, 8, 8, 8, 11, 11, 12, 12, 15, 17, 22, 23]

LEUKEMIA_DEFAULTS = dict(M=70.0, q=50)
WEIBULL_DEFAULTS = dict(M=5.0, q=100)


def builtin_leukemia() -> tuple[RawDataset, RawDataset]:
    """Remission times in weeks: ``(treatment, placebo)``."""
    t, e = zip(*_TREATMENT)
    treat = RawDataset(np.array(t, float), np.array(e), "leukemia-treatment", "weeks")
    plac = RawDataset(np.array(_PLACEBO, float), np.ones(len(_PLACEBO), dtype=np.int64),
                      "leukemia-placebo", "weeks")
    return treat, plac


def weibull_mixture_survival(t):
    """``S(t) = (exp(-(t/2)^2) + exp(-(2t)^2)) / 2``: equal mix of Weibull(shape 2, scale 2) and (2, 1/2)."""
    t = np.asarray(t, dtype=float)
    return 0.5 * np.exp(-(t / 2.0) ** 2) + 0.5 * np.exp(-(2.0 * t) ** 2)


def simulate_weibull_mixture(n: int, seed: int) -> RawDataset:
    """``n`` exact draws: pick a component, then invert its survival function."""
    if n < 1:
        raise DataError("n must be at least 1")
    rng = np.random.default_rng(seed)
    scale = np.where(rng.random(n) < 0.5, 2.0, 0.5)
    t = scale * np.sqrt(-np.log1p(-rng.random(n)))
    t = np.maximum(t, np.finfo(float).tiny)
    return RawDataset(t, np.ones(n, dtype=np.int64), f"weibull-mix:n={n}:seed={seed}")
