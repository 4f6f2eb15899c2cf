"""Noise, datasets and seeded generation of y_i = f*(x_i) + eps_i."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

NOISE_KINDS = ("bounded-uniform", "signed-bernoulli", "zero")


def fmt(x):
    """Full-precision decimal used in every CSV/JSON output."""
    return format(float(x), ".17g")


def derive_seed(base, *keys):
    """64-bit seed mixed from ``base`` and integer keys via ``SeedSequence``.

    Each (base, keys) tuple gets its own entropy pool, so replicate streams
    do not depend on how many other replicates were drawn.
    """
    state = np.random.SeedSequence([int(base) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)]).generate_state(1, np.uint64)
    return int(state[0])


def make_rng(seed):
    """Counter-based Philox stream for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "zero"
    m: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.m < 0:
            raise ConfigurationError("noise bound m must be >= 0")
        if self.kind == "zero" and self.m != 0:
            object.__setattr__(self, "m", 0.0)

    @property
    def variance(self):
        if self.kind == "bounded-uniform":
            return self.m ** 2 / 3.0
        if self.kind == "signed-bernoulli":
            return self.m ** 2
        return 0.0

    def sample(self, rng, n):
        if self.kind == "bounded-uniform":
            return rng.uniform(-self.m, self.m, size=n)
        if self.kind == "signed-bernoulli":
            return np.where(rng.random(n) < 0.5, -self.m, self.m)
        return np.zeros(n)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}

    @classmethod
    def from_dict(cls, spec):
        if spec is None:
            return cls()
        return cls(spec.get("kind", "zero"), float(spec.get("m", 0.0)))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    responses: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]  # a flat array is one feature, not one sample
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.size:
            raise ConfigurationError(f"{X.shape[0]} feature rows but {y.size} responses")
        if np.any(X < 0) or np.any(X > 1):
            raise ConfigurationError("features must lie in [0, 1]")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def manifest(self):
        return {"n": self.n, "p": self.p, "seed": self.seed, **self.meta}

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(self.p)] + ["y"])
            for row, yi in zip(self.features, self.responses):
                w.writerow([fmt(v) for v in row] + [fmt(yi)])
        return path

    def write_manifest(self, path):
        Path(path).write_text(json.dumps(self.manifest(), indent=2, default=_json_default))

    @classmethod
    def from_csv(cls, path):
        """Read ``x1,...,xp,y`` CSV.  Raises ``CsvFormatError`` with a line number."""
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise CsvFormatError("empty file", 1)
        header = [h.strip() for h in rows[0]]
        p = len(header) - 1
        if p < 1 or header != [f"x{k + 1}" for k in range(p)] + ["y"]:
            raise CsvFormatError(f"header must be x1,...,xp,y, got {','.join(header)}", 1)
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != p + 1:
                raise CsvFormatError(f"expected {p + 1} fields, got {len(row)}", lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise CsvFormatError("non-numeric field", lineno) from None
            if not all(np.isfinite(vals)) or any(v < 0 or v > 1 for v in vals[:p]):
                raise CsvFormatError("features must be finite and in [0, 1]", lineno)
            data.append(vals)
        if not data:
            raise CsvFormatError("no data rows", 2)
        arr = np.array(data)
        return cls(arr[:, :p], arr[:, p])


class CsvFormatError(ConfigurationError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def generate_dataset(f, dist, noise, n, seed):
    """Draw n i.i.d. pairs (x_i, f*(x_i) + eps_i), x_i ~ dist.

    Features and noise come from one Philox stream seeded by ``seed``
    (features first), so equal arguments give bit-identical data.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if f.dim != dist.dim:
        raise ConfigurationError(f"signal dimension {f.dim} != distribution dimension {dist.dim}")
    rng = make_rng(seed)
    X = dist.sample(rng, int(n))
    y = f(X) + noise.sample(rng, int(n))
    meta = {"M": f.bound, "m": noise.m, "U": f.bound + noise.m,
            "signal": f.to_dict(), "distribution": dist.to_dict(), "noise": noise.to_dict()}
    return Dataset(X, y, int(seed), meta)
