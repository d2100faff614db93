"""Noise models for corrupting [0, 1]-normalized windows.

Specs can be written as short strings, e.g. ``gaussian:var=0.05``,
``poisson:lam=0.02``, ``uniform:lo=-0.1,hi=0.1`` or ``salt_pepper:p=0.05``.
A bare kind name uses the defaults in :data:`DEFAULTS`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

KINDS = ("gaussian", "poisson", "uniform", "salt_pepper")

DEFAULTS = {
    "gaussian": {"var": 0.05},
    "poisson": {"lam": 0.02, "centered": 1.0},
    "uniform": {"lo": -0.1, "hi": 0.1},
    "salt_pepper": {"p": 0.05},
}

_ALIASES = {"salt-and-pepper": "salt_pepper", "saltpepper": "salt_pepper",
            "sp": "salt_pepper", "normal": "gaussian"}


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        merged = dict(DEFAULTS[kind])
        for key, value in self.params.items():
            if key not in merged:
                raise ValueError(
                    f"{kind} noise has no parameter {key!r} "
                    f"(known: {', '.join(merged)})"
                )
            merged[key] = float(value)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", merged)
        _validate(kind, merged)

    @classmethod
    def parse(cls, text: str, seed: int | None = None) -> "NoiseSpec":
        kind, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed noise parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ValueError(f"non-numeric value in {item!r}") from None
        return cls(kind.strip().lower(), params, seed)

    def with_seed(self, seed) -> "NoiseSpec":
        return replace(self, seed=seed)

    def label(self) -> str:
        args = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}:{args}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}


def _validate(kind: str, p: dict) -> None:
    if kind == "gaussian" and not p["var"] > 0:
        raise ValueError("gaussian variance must be > 0")
    if kind == "poisson" and not p["lam"] > 0:
        raise ValueError("poisson rate must be > 0")
    if kind == "uniform" and not p["lo"] < p["hi"]:
        raise ValueError("uniform noise needs lo < hi")
    if kind == "salt_pepper" and not 0 < p["p"] < 1:
        raise ValueError("salt-and-pepper density must lie in (0, 1)")


DEFAULT_SPECS = tuple(NoiseSpec(k) for k in KINDS)


def corrupt(x, spec: NoiseSpec, rng=None) -> np.ndarray:
    """Return a corrupted copy of ``x``.

    Additive kinds add i.i.d. samples (Poisson counts are mean-centred unless
    ``centered=0``). Salt-and-pepper replaces each sample by 0 or 1 with
    probability ``p/2`` each. Randomness comes from ``rng`` if given, else
    from ``spec.seed``.
    """
    if not isinstance(spec, NoiseSpec):
        raise ValueError(f"expected a NoiseSpec, got {type(spec).__name__}")
    x = np.asarray(x, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    p = spec.params
    if spec.kind == "gaussian":
        return x + rng.normal(0.0, np.sqrt(p["var"]), size=x.shape)
    if spec.kind == "uniform":
        return x + rng.uniform(p["lo"], p["hi"], size=x.shape)
    if spec.kind == "poisson":
        counts = rng.poisson(p["lam"], size=x.shape).astype(np.float64)
        return x + (counts - p["lam"] if p["centered"] else counts)
    u = rng.random(size=x.shape)
    out = x.copy()
    out[u < p["p"] / 2] = 0.0
    out[(u >= p["p"] / 2) & (u < p["p"])] = 1.0
    return out
