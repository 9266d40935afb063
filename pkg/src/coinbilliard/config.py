"""Run configuration: a flat ``key = value`` text file, overridable by CLI flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace

from .core import CORNER_TOL, CoinParams

OUT_ENV = "COINBILLIARD_OUT"


@dataclass(frozen=True)
class RunConfig:
    energy: float = 1.0e4
    gravity: float = 1.0
    mass: float = 1.0
    length: float = 2.0
    grid_n: int = 512
    corner_tol: float = CORNER_TOL
    match_tol: float = 1e-8
    seed: int = 0
    out_dir: str = ""
    format: str = "csv"

    def __post_init__(self):
        for name in ("corner_tol", "match_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_n < 64:
            raise ValueError("grid_n must be at least 64")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    @property
    def output_dir(self) -> str:
        return self.out_dir or os.environ.get(OUT_ENV, ".")

    def params(self) -> CoinParams:
        return CoinParams(E=self.energy, m=self.mass, l=self.length, g=self.gravity)

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            conv = {"float": float, "int": int, "str": str}[types[key]]
            kw[key] = conv(val)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def override(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
