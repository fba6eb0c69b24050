"""Scenario files: parsing, normalization, resolution into objects and serialization.

A scenario file is YAML with five sections::

    metadata:    {name: ideal, seed: 0, rounds: {M: 1000000, M_prime: 10000, N: 990000}}
    states:
      alice: {family: bell, kind: 0}
      bob:   {family: werner, p: 0.8}
    instrument:  {preset: bell}
    cheating:    {preset: partial_leak, eps: 0.2}
    measurement: {preset: computational}

Complex matrices are nested lists of ``[real, imag]`` pairs.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import attacks
from .channels import ClassicalChannel, KrausMap, MeasurementSet, QuantumInstrument
from .protocol import ScenarioConfig
from .states import (
    ALICE,
    ALICE_TX,
    BOB,
    BOB_TX,
    EVE,
    DensityMatrix,
    bell_state,
    maximally_mixed,
    mix_with_noise,
    random_density,
    werner_state,
)
from .tensorspace import RegisterLayout

SECTIONS = ("metadata", "states", "instrument", "cheating", "measurement")

_STATE_FAMILIES = {
    "bell": {"kind": 0},
    "werner": {"p": 1.0},
    "maximally_mixed": {},
    "random": {"rank": None, "seed": None},
    "matrix": {"matrix": None},
}
_INSTRUMENTS = {
    "bell": {},
    "depolarized": {"q": 0.0},
    "random": {"branches": 4, "kraus_per_branch": 1, "e_dim": 1, "seed": None},
    "leaky_bell": {"theta": 0.1, "e_dim": 2, "kraus_per_branch": 1, "seed": None},
    "explicit": {"e_dim": 1, "branches": None},
}
_CHEATING = {
    "identity": {},
    "dos": {"target": None},
    "partial_leak": {"eps": 0.0},
    "random": {"outputs": None, "seed": None},
    "matrix": {"matrix": None},
}
_MEASUREMENTS = {
    "computational": {},
    "hadamard": {},
    "sic": {},
    "random_rank_one": {"outcomes": 2, "seed": None},
    "explicit": {"operators": None},
}
# role index used to derive per-component seeds from metadata.seed
_ROLES = {"alice": 0, "bob": 1, "instrument": 2, "cheating": 3, "measurement": 4}


class ConfigError(ValueError):
    """Scenario file cannot be parsed or violates an invariant."""


def derive_seed(seed: int, role: str) -> int:
    return int(np.random.SeedSequence([int(seed), _ROLES[role]]).generate_state(1, np.uint32)[0])


def complex_to_pairs(m) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 0:
        return [float(m.real), float(m.imag)]
    return [complex_to_pairs(row) for row in m]


def pairs_to_complex(data, name: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: matrix entries must be numbers or [real, imag] pairs") from exc
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ConfigError(f"{name}: expected a matrix of [real, imag] pairs, got shape {arr.shape}")


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key)
    if not isinstance(value, dict):
        raise ConfigError(f"section {key!r} missing or not a mapping")
    return dict(value)


def _fill(entry: dict, kind_key: str, table: dict, where: str) -> dict:
    kind = entry.get(kind_key)
    if kind not in table:
        raise ConfigError(f"{where}: unknown {kind_key} {kind!r}; choose from {sorted(table)}")
    out = {kind_key: kind}
    for k, default in table[kind].items():
        out[k] = entry.get(k, default)
    unknown = set(entry) - set(out) - {"dims", "noise"}
    if unknown:
        raise ConfigError(f"{where}: unexpected keys {sorted(unknown)}")
    return out


def normalize(raw: dict) -> dict:
    """Fill defaults and derived seeds so that every parameter of the scenario is explicit."""
    try:
        return _normalize(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def _normalize(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    meta = dict(raw.get("metadata") or {})
    seed = int(meta.get("seed", 0))
    rounds = dict(meta.get("rounds") or {})
    norm: dict[str, Any] = {
        "metadata": {
            "name": str(meta.get("name", "scenario")),
            "seed": seed,
            "rounds": {k: rounds.get(k) for k in ("M", "M_prime", "N")},
        }
    }
    states = _section(raw, "states")
    norm["states"] = {}
    for side in ("alice", "bob"):
        if side not in states or not isinstance(states[side], dict):
            raise ConfigError(f"states.{side} missing")
        entry = states[side]
        out = _fill(entry, "family", _STATE_FAMILIES, f"states.{side}")
        out["dims"] = [int(d) for d in entry.get("dims", [2, 2])]
        out["noise"] = float(entry.get("noise", 0.0))
        fam = out["family"]
        if fam == "random":
            out["rank"] = int(out["rank"] or out["dims"][0] * out["dims"][1])
            out["seed"] = derive_seed(seed, side) if out["seed"] is None else int(out["seed"])
        elif fam == "matrix":
            if out["matrix"] is None:
                raise ConfigError(f"states.{side}: matrix family needs 'matrix'")
            out["matrix"] = complex_to_pairs(pairs_to_complex(out["matrix"], f"states.{side}.matrix"))
        elif fam == "werner":
            out["p"] = float(out["p"])
        elif fam == "bell":
            out["kind"] = int(out["kind"])
        norm["states"][side] = out

    instr = _fill(_section(raw, "instrument"), "preset", _INSTRUMENTS, "instrument")
    if instr["preset"] == "leaky_bell":
        instr["seed"] = derive_seed(seed, "instrument") if instr["seed"] is None else int(instr["seed"])
        instr["theta"] = float(instr["theta"])
        instr["e_dim"] = int(instr["e_dim"])
        instr["kraus_per_branch"] = int(instr["kraus_per_branch"])
    elif instr["preset"] == "random":
        instr["seed"] = derive_seed(seed, "instrument") if instr["seed"] is None else int(instr["seed"])
        for k in ("branches", "kraus_per_branch", "e_dim"):
            instr[k] = int(instr[k])
    elif instr["preset"] == "explicit":
        if not instr["branches"]:
            raise ConfigError("instrument: explicit preset needs 'branches'")
        instr["e_dim"] = int(instr["e_dim"])
        instr["branches"] = [
            [complex_to_pairs(pairs_to_complex(k, "instrument.branches")) for k in branch]
            for branch in instr["branches"]
        ]
    elif instr["preset"] == "depolarized":
        instr["q"] = float(instr["q"])
    norm["instrument"] = instr

    cheat = _fill(_section(raw, "cheating"), "preset", _CHEATING, "cheating")
    if cheat["preset"] == "random":
        cheat["seed"] = derive_seed(seed, "cheating") if cheat["seed"] is None else int(cheat["seed"])
    elif cheat["preset"] == "matrix":
        if cheat["matrix"] is None:
            raise ConfigError("cheating: matrix preset needs 'matrix'")
        cheat["matrix"] = [[float(v) for v in row] for row in cheat["matrix"]]
    elif cheat["preset"] == "partial_leak":
        cheat["eps"] = float(cheat["eps"])
    elif cheat["preset"] == "dos" and cheat["target"] is not None:
        cheat["target"] = [float(v) for v in cheat["target"]]
    norm["cheating"] = cheat

    meas = _fill(_section(raw, "measurement"), "preset", _MEASUREMENTS, "measurement")
    if meas["preset"] == "random_rank_one":
        meas["seed"] = derive_seed(seed, "measurement") if meas["seed"] is None else int(meas["seed"])
        meas["outcomes"] = int(meas["outcomes"])
    elif meas["preset"] == "explicit":
        if not meas["operators"]:
            raise ConfigError("measurement: explicit preset needs 'operators'")
        meas["operators"] = [complex_to_pairs(pairs_to_complex(o, "measurement.operators")) for o in meas["operators"]]
    norm["measurement"] = meas
    return norm


def _resolve_state(entry: dict, names: tuple[str, str]) -> DensityMatrix:
    dims = entry["dims"]
    layout = RegisterLayout.of((names[0], dims[0]), (names[1], dims[1]))
    fam = entry["family"]
    if fam in ("bell", "werner") and tuple(dims) != (2, 2):
        raise ConfigError(f"{fam} family is defined for qubit pairs only")
    if fam == "bell":
        rho = bell_state(entry["kind"], names).density()
    elif fam == "werner":
        rho = werner_state(entry["p"], names)
    elif fam == "maximally_mixed":
        rho = maximally_mixed(layout)
    elif fam == "random":
        rho = random_density(layout, entry["rank"], entry["seed"])
    else:
        rho = DensityMatrix(layout, pairs_to_complex(entry["matrix"]))
    return mix_with_noise(rho, entry["noise"]) if entry["noise"] else rho


def _resolve_instrument(entry: dict, in_dims: tuple[int, int]) -> QuantumInstrument:
    preset = entry["preset"]
    in_layout = RegisterLayout.of((ALICE_TX, in_dims[0]), (BOB_TX, in_dims[1]))
    if preset in ("bell", "depolarized", "leaky_bell") and tuple(in_dims) != (2, 2):
        raise ConfigError(f"instrument preset {preset!r} needs qubit A' and B'")
    if preset == "bell":
        return attacks.bell_instrument()
    if preset == "depolarized":
        return attacks.depolarized_instrument(entry["q"])
    if preset == "leaky_bell":
        return attacks.leaky_bell_instrument(entry["theta"], entry["e_dim"], entry["kraus_per_branch"], entry["seed"])
    if preset == "random":
        return attacks.random_instrument(
            in_layout, entry["branches"], entry["kraus_per_branch"], entry["e_dim"], entry["seed"]
        )
    out = RegisterLayout.of((EVE, entry["e_dim"]))
    branches = tuple(
        KrausMap(in_layout, out, tuple(pairs_to_complex(k) for k in branch)) for branch in entry["branches"]
    )
    return QuantumInstrument(branches)


def _resolve_cheating(entry: dict, n_labels: int) -> ClassicalChannel:
    preset = entry["preset"]
    if preset == "identity":
        return attacks.identity_channel(n_labels)
    if preset == "dos":
        return attacks.dos_channel(n_labels, entry["target"])
    if preset == "partial_leak":
        return attacks.partial_leak_channel(entry["eps"], n_labels)
    if preset == "random":
        return attacks.random_channel(n_labels, int(entry["outputs"] or n_labels), entry["seed"])
    return ClassicalChannel(np.asarray(entry["matrix"], dtype=float))


def _resolve_measurement(entry: dict, d: int) -> MeasurementSet:
    preset = entry["preset"]
    if preset == "computational":
        return attacks.computational_measurement(d)
    if preset in ("hadamard", "sic"):
        if d != 2:
            raise ConfigError(f"measurement preset {preset!r} is defined for a qubit A")
        return attacks.hadamard_measurement() if preset == "hadamard" else attacks.sic_measurement()
    if preset == "random_rank_one":
        return attacks.random_rank_one_measurement(d, entry["outcomes"], entry["seed"])
    return MeasurementSet(tuple(pairs_to_complex(o) for o in entry["operators"]))


def resolve(spec: dict) -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig` from a raw or normalized spec."""
    norm = normalize(spec)
    try:
        alice = _resolve_state(norm["states"]["alice"], (ALICE, ALICE_TX))
        bob = _resolve_state(norm["states"]["bob"], (BOB, BOB_TX))
        instr = _resolve_instrument(norm["instrument"], (alice.layout.dim(ALICE_TX), bob.layout.dim(BOB_TX)))
        cheat = _resolve_cheating(norm["cheating"], instr.n_labels)
        meas = _resolve_measurement(norm["measurement"], alice.layout.dim(ALICE))
        meta = norm["metadata"]
        return ScenarioConfig(alice, bob, instr, cheat, meas, meta["name"], meta["seed"], meta["rounds"], norm)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def parse(text: str, source: str = "<string>") -> dict:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"parse error at {where}: {problem}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return raw


def load_scenario(path, seed: int | None = None) -> ScenarioConfig:
    """Load a scenario file; ``seed`` overrides ``metadata.seed``."""
    path = Path(path)
    raw = parse(path.read_text(), str(path))
    if seed is not None:
        raw.setdefault("metadata", {})
        raw["metadata"] = dict(raw["metadata"] or {}, seed=seed)
    return resolve(raw)


def dump(spec: dict) -> str:
    return yaml.safe_dump(normalize(spec), sort_keys=False)


def spec_hash(spec: dict) -> str:
    canon = json.dumps(normalize(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def set_path(spec: dict, path: str, value) -> dict:
    """Copy of ``spec`` with the dotted ``path`` set; the path must already exist."""
    out = copy.deepcopy(spec)
    node = out
    keys = path.split(".")
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(f"unknown parameter path {path!r}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"unknown parameter path {path!r}")
    node[keys[-1]] = value
    return out


def ideal_spec(name: str = "ideal_swap") -> dict:
    return {
        "metadata": {"name": name, "seed": 0},
        "states": {"alice": {"family": "bell", "kind": 0}, "bob": {"family": "bell", "kind": 0}},
        "instrument": {"preset": "bell"},
        "cheating": {"preset": "identity"},
        "measurement": {"preset": "computational"},
    }


def random_spec(seed: int, index: int) -> dict:
    """Random qubit scenario: up to 4 relay labels, E of dimension 1 or 2, rank-one Alice POVM."""
    rng = np.random.default_rng([int(seed), int(index), 0x5EED])

    def draw() -> int:
        return int(rng.integers(1, 2**31 - 1))

    e_dim = int(rng.integers(1, 3))
    branches = int(rng.integers(1, 5))
    kraus = max(1, -(-4 // (branches * e_dim)))
    return normalize({
        "metadata": {"name": f"random_{seed}_{index}", "seed": int(seed)},
        "states": {
            side: {"family": "random", "rank": int(rng.integers(1, 5)), "seed": draw()}
            for side in ("alice", "bob")
        },
        "instrument": {"preset": "random", "branches": branches, "kraus_per_branch": kraus,
                       "e_dim": e_dim, "seed": draw()},
        "cheating": {"preset": "random", "outputs": int(rng.integers(1, 5)), "seed": draw()},
        "measurement": {"preset": "random_rank_one", "outcomes": int(rng.integers(2, 5)), "seed": draw()},
    })
