"""JSON round-trips for scenarios, distributions, boxes, and models.

All documents carry a "schema" field ("corrscen/1"); loaders tolerate its
absence. Probabilities may be numbers or strings like "1/3", which load as
exact fractions; exact tables dump back to fraction strings.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .bell import ConditionalBox
from .dist import JointDistribution
from .errors import CorrScenError
from .models import ClassicalModel
from .quantum import QuantumModel
from .scenario import Scenario, validate_scenario

SCHEMA = "corrscen/1"


def _load_number(value):
    if isinstance(value, str):
        return Fraction(value)
    return value


def _dump_number(value):
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


def _load_prob_array(values, shape=None):
    data = [_load_number(v) for v in values]
    exact = any(isinstance(v, Fraction) for v in data)
    arr = np.array(data, dtype=object if exact else float)
    if exact:
        flat = arr.reshape(-1)
        for i, v in enumerate(flat):
            flat[i] = v if isinstance(v, Fraction) else Fraction(v)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def _dump_prob_array(arr):
    return [_dump_number(v) for v in np.asarray(arr).reshape(-1)]


# -- scenarios ---------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema": SCHEMA,
        "measurements": [{"name": n, "outcomes": d} for n, d in s.measurements],
        "sources": [{"name": n, "connects": list(c)} for n, c in s.sources],
    }


def scenario_from_dict(doc: dict, strict: bool = False) -> Scenario:
    return validate_scenario(doc, strict=strict)


# -- distributions -----------------------------------------------------------

def dist_to_dict(p: JointDistribution, sparse: bool = False) -> dict:
    doc = {
        "schema": SCHEMA,
        "variables": list(p.names),
        "cardinalities": list(p.cards),
    }
    if sparse:
        doc["support"] = [
            {"values": [int(v) for v in idx], "p": _dump_number(p.table[idx])}
            for idx in sorted(p.support())
        ]
    else:
        doc["probabilities"] = _dump_prob_array(p.table)
    return doc


def dist_from_dict(doc: dict, eps: float = 1e-9) -> JointDistribution:
    try:
        names = tuple(doc["variables"])
        cards = tuple(int(c) for c in doc["cardinalities"])
        if "probabilities" in doc:
            table = _load_prob_array(doc["probabilities"], cards)
            return JointDistribution(names, cards, table, eps)
        support = {tuple(entry["values"]): _load_number(entry["p"])
                   for entry in doc["support"]}
        return JointDistribution.from_support(names, cards, support, eps)
    except (KeyError, TypeError, ValueError) as err:
        raise CorrScenError(f"malformed distribution document: {err}") from err


# -- boxes ---------------------------------------------------------------------

def box_to_dict(b: ConditionalBox) -> dict:
    doc = {
        "schema": SCHEMA,
        "parties": [{"settings": s, "outcomes": o} for s, o in b.parties],
        "table": _dump_prob_array(b.table),
    }
    if b.setting_values is not None:
        doc["setting_values"] = [list(v) for v in b.setting_values]
    return doc


def box_from_dict(doc: dict) -> ConditionalBox:
    try:
        parties = tuple((int(p["settings"]), int(p["outcomes"])) for p in doc["parties"])
        shape = tuple(s for s, _ in parties) + tuple(o for _, o in parties)
        table = np.asarray([float(_load_number(v)) for v in doc["table"]]).reshape(shape)
        setting_values = doc.get("setting_values")
        if setting_values is not None:
            setting_values = tuple(tuple(int(x) for x in v) for v in setting_values)
        return ConditionalBox(parties, table, setting_values=setting_values)
    except (KeyError, TypeError, ValueError) as err:
        raise CorrScenError(f"malformed box document: {err}") from err


# -- classical models ----------------------------------------------------------

def classical_model_to_dict(m: ClassicalModel) -> dict:
    s = m.scenario
    return {
        "schema": SCHEMA,
        "scenario": scenario_to_dict(s),
        "sources": [
            {"name": s.source_names[e], "cardinality": len(m.source_dists[e]),
             "dist": _dump_prob_array(m.source_dists[e])}
            for e in range(len(s.sources))
        ],
        "kernels": [
            {"measurement": s.measurement_names[v],
             "sources": [s.source_names[e] for e in s.sources_of_measurement[v]],
             "table": _dump_prob_array(m.kernels[v])}
            for v in range(len(s.measurements))
        ],
    }


def classical_model_from_dict(doc: dict) -> ClassicalModel:
    try:
        scenario = scenario_from_dict(doc["scenario"])
        by_name = {entry["name"]: entry for entry in doc["sources"]}
        dists = []
        cards = {}
        for name in scenario.source_names:
            entry = by_name[name]
            cards[name] = int(entry["cardinality"])
            dists.append(_load_prob_array(entry["dist"], (cards[name],)))
        kernels_by_name = {entry["measurement"]: entry for entry in doc["kernels"]}
        kernels = []
        for v, (vname, d_v) in enumerate(scenario.measurements):
            entry = kernels_by_name[vname]
            expected_sources = [scenario.source_names[e]
                                for e in scenario.sources_of_measurement[v]]
            if list(entry["sources"]) != expected_sources:
                raise CorrScenError(
                    f"kernel for {vname!r} lists sources {entry['sources']}, "
                    f"expected {expected_sources} (declaration order)")
            shape = tuple(cards[n] for n in expected_sources) + (d_v,)
            kernels.append(_load_prob_array(entry["table"], shape))
        exact = any(arr.dtype == object for arr in dists + kernels)
        if exact:
            from .lp import as_exact_array
            dists = [as_exact_array(d) for d in dists]
            kernels = [as_exact_array(k) for k in kernels]
        return ClassicalModel(scenario, tuple(dists), tuple(kernels))
    except (KeyError, TypeError, ValueError) as err:
        raise CorrScenError(f"malformed classical model document: {err}") from err


# -- quantum models --------------------------------------------------------------

def _matrix_to_json(m: np.ndarray):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def quantum_model_to_dict(q: QuantumModel) -> dict:
    s = q.scenario
    return {
        "schema": SCHEMA,
        "scenario": scenario_to_dict(s),
        "connection_dims": [
            {"source": src, "measurement": meas, "dim": dim}
            for (src, meas), dim in sorted(q.connection_dims.items())
        ],
        "states": [{"source": s.source_names[e], "matrix": _matrix_to_json(q.states[e])}
                   for e in range(len(s.sources))],
        "povms": [{"measurement": s.measurement_names[v],
                   "elements": [_matrix_to_json(el) for el in q.povms[v]]}
                  for v in range(len(s.measurements))],
    }


def quantum_model_from_dict(doc: dict) -> QuantumModel:
    try:
        scenario = scenario_from_dict(doc["scenario"])
        dims = {(e["source"], e["measurement"]): int(e["dim"])
                for e in doc["connection_dims"]}
        states_by = {e["source"]: _matrix_from_json(e["matrix"]) for e in doc["states"]}
        povms_by = {e["measurement"]: tuple(_matrix_from_json(el) for el in e["elements"])
                    for e in doc["povms"]}
        states = tuple(states_by[name] for name in scenario.source_names)
        povms = tuple(povms_by[name] for name in scenario.measurement_names)
        return QuantumModel(scenario, dims, states, povms)
    except (KeyError, TypeError, ValueError) as err:
        raise CorrScenError(f"malformed quantum model document: {err}") from err


# -- file helpers -----------------------------------------------------------------

def load_json(path_or_stream):
    if hasattr(path_or_stream, "read"):
        return json.load(path_or_stream)
    with open(path_or_stream, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(doc, stream=None, deterministic: bool = True) -> str:
    text = json.dumps(doc, indent=2, sort_keys=deterministic)
    if stream is not None:
        stream.write(text + "\n")
    return text
