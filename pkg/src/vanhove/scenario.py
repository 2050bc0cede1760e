"""Scenario files: ``[section]`` headers and ``key = value`` lines, ``#`` comments.

Every key is checked against :data:`SCHEMA`; unknown keys, bad types and
violated constraints raise :class:`ScenarioError` naming the key and line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_SEED = 0x5EED_1A2B_3C4D_5E6F


class ScenarioError(ValueError):
    pass


class InfraredRiskError(ScenarioError):
    """A massless field below three dimensions without the override."""


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# section -> key -> (parser, default); a default of ... marks a required key
SCHEMA = {
    "model": {
        "dimension": (int, ...),
        "dispersion": (_choice("massless", "massive"), "massless"),
        "mass": (float, 0.0),
    },
    "grid": {
        "n": (int, ...),
        "K": (float, ...),
        "keep_origin": (_bool, False),
    },
    "basis": {
        "N": (int, ...),
    },
    "source": {
        "kind": (_choice("gaussian", "neutral_gaussian", "tabulated"), "gaussian"),
        "A": (float, 1.0),
        "sigma": (float, 1.0),
        "lambda": (float, 1.0),
        "table": (str, None),
    },
    "states": {
        "pair": (_choice("dressed-vacuum", "dressed-one-particle", "amplitude-file"), "dressed-vacuum"),
        "mode": (int, 0),
        "file": (str, None),
    },
    "run": {
        "times": (_floats, [0.0, 0.7, 1.4]),
        "points": (int, 41),
        "length": (float, None),
        "fd_steps": (_floats, [0.1, 0.05, 0.025]),
        "random_states": (int, 20),
        "seed": (int, DEFAULT_SEED),
        "allow_ir_risk": (_bool, False),
        "output": (str, "out"),
    },
    "tolerances": {
        "residual": (float, 1e-10),
        "static": (float, 1e-12),
        "reality": (float, 1e-10),
        "amplitude": (float, 1e-6),
        "diagonalization": (float, 1e-6),
        "fd_order": (float, 0.2),
    },
    "caps": {
        "max_basis": (int, 200_000),
        "dense_threshold": (int, 4000),
        "wall_budget": (float, 600.0),
    },
    "sweep": {
        "N": (_ints, None),
        "n": (_ints, None),
        "K": (_floats, None),
        "h": (_floats, None),
    },
}


@dataclass
class Scenario:
    dimension: int
    dispersion: str
    mass: float
    n: int
    K: float
    keep_origin: bool
    N: int
    source_kind: str
    A: float
    sigma: float
    lam: float
    table: Path | None
    pair: str
    mode: int
    state_file: Path | None
    times: list[float]
    points: int
    length: float
    fd_steps: list[float]
    random_states: int
    seed: int
    allow_ir_risk: bool
    output: Path
    tolerances: dict[str, float]
    max_basis: int
    dense_threshold: int
    wall_budget: float
    sweep: dict[str, list] = field(default_factory=dict)
    path: Path | None = None


def read_sections(text: str, origin: str = "<scenario>") -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SCHEMA:
                raise ScenarioError(f"{origin}:{lineno}: unknown section [{current}]")
            if current in sections:
                raise ScenarioError(f"{origin}:{lineno}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ScenarioError(f"{origin}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ScenarioError(f"{origin}:{lineno}: key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[current]:
            raise ScenarioError(f"{origin}:{lineno}: unknown key {key!r} in [{current}]")
        if key in sections[current]:
            raise ScenarioError(f"{origin}:{lineno}: duplicate key {key!r} in [{current}]")
        sections[current][key] = (value, lineno)
    return sections


def parse_scenario_text(text: str, origin: str = "<scenario>", base_dir: Path | None = None,
                        allow_ir_risk: bool = False) -> Scenario:
    sections = read_sections(text, origin)
    values: dict[str, dict] = {}
    lines: dict[str, int] = {}
    for section, keys in SCHEMA.items():
        got = sections.get(section, {})
        values[section] = {}
        for key, (parser, default) in keys.items():
            if key in got:
                raw, lineno = got[key]
                lines[f"{section}.{key}"] = lineno
                try:
                    values[section][key] = parser(raw)
                except ValueError as exc:
                    raise ScenarioError(f"{origin}:{lineno}: [{section}] {key}: {exc}") from None
            elif default is ...:
                raise ScenarioError(f"{origin}: missing required key {key!r} in [{section}]")
            else:
                values[section][key] = default

    def fail(key: str, msg: str, kind=ScenarioError):
        where = lines.get(key)
        loc = f"{origin}:{where}" if where else origin
        raise kind(f"{loc}: {key}: {msg}")

    m, g, b, s, st, r = (values[k] for k in ("model", "grid", "basis", "source", "states", "run"))
    caps = values["caps"]
    r["allow_ir_risk"] = r["allow_ir_risk"] or allow_ir_risk
    base_dir = base_dir or Path(".")

    if m["dimension"] < 1:
        fail("model.dimension", "must be >= 1")
    if m["dispersion"] == "massive" and not m["mass"] > 0:
        fail("model.mass", "massive dispersion needs mass > 0")
    if m["dispersion"] == "massless" and m["mass"] != 0:
        fail("model.mass", "massless dispersion takes mass = 0")
    if m["dispersion"] == "massless" and m["dimension"] < 3 and not r["allow_ir_risk"]:
        fail("model.dimension", "massless field requires d ≥ 3 (set allow_ir_risk to override)",
             InfraredRiskError)
    if m["dispersion"] == "massless" and g["keep_origin"]:
        fail("grid.keep_origin", "massless grids must exclude the origin")
    if g["n"] < 1:
        fail("grid.n", "must be >= 1")
    if not g["K"] > 0:
        fail("grid.K", "must be > 0")
    if b["N"] < 1:
        fail("basis.N", "must be >= 1")
    if not s["sigma"] > 0:
        fail("source.sigma", "must be > 0")
    if s["lambda"] < 0:
        fail("source.lambda", "must be >= 0")
    if s["kind"] == "tabulated" and not s["table"]:
        fail("source.table", "tabulated source needs a table path")
    if st["pair"] == "amplitude-file" and not st["file"]:
        fail("states.file", "amplitude-file pair needs a file path")
    if st["mode"] < 0:
        fail("states.mode", "must be >= 0")
    if r["points"] < 1:
        fail("run.points", "must be >= 1")
    if not r["times"]:
        fail("run.times", "needs at least one time")
    if len(r["fd_steps"]) < 2 or any(h <= 0 for h in r["fd_steps"]):
        fail("run.fd_steps", "needs at least two positive steps")
    if not 0 <= r["seed"] < 2**64:
        fail("run.seed", "must fit in an unsigned 64-bit integer")
    for key, ladder in values["sweep"].items():
        if ladder is not None and len(ladder) < 3:
            fail(f"sweep.{key}", "a sweep ladder needs at least 3 values")

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base_dir / p

    return Scenario(
        dimension=m["dimension"], dispersion=m["dispersion"], mass=m["mass"],
        n=g["n"], K=g["K"], keep_origin=g["keep_origin"], N=b["N"],
        source_kind=s["kind"], A=s["A"], sigma=s["sigma"], lam=s["lambda"], table=resolve(s["table"]),
        pair=st["pair"], mode=st["mode"], state_file=resolve(st["file"]),
        times=r["times"], points=r["points"],
        length=r["length"] if r["length"] is not None else 4.0 * s["sigma"],
        fd_steps=r["fd_steps"], random_states=r["random_states"], seed=r["seed"],
        allow_ir_risk=r["allow_ir_risk"], output=resolve(r["output"]),
        tolerances=dict(values["tolerances"]),
        max_basis=caps["max_basis"], dense_threshold=caps["dense_threshold"], wall_budget=caps["wall_budget"],
        sweep={k: v for k, v in values["sweep"].items() if v is not None},
    )


def parse_scenario(path, allow_ir_risk: bool = False) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"{path}: no such scenario file")
    sc = parse_scenario_text(path.read_text(), str(path), path.parent, allow_ir_risk)
    sc.path = path
    return sc
