"""Scenario files (JSON) and result tables (CSV)."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import re
import sys

import numpy as np

from .errors import CloudMarketError
from .market import CrossEffects, EquilibriumResult, MarketScenario, Measure, ProviderParams, QosAttraction, StrategyProfile
from .numerics import ToleranceConfig

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "market", "providers", "cross", "tolerances"}
_MARKET_KEYS = {"rt_bar", "measure"}
_MEASURE_KEYS = {"mode", "phi"}
_PROVIDER_REQUIRED = (
    "id",
    "cost_per_request",
    "cost_per_capacity",
    "own_price_sensitivity",
    "qos_base",
    "qos_log_coeff",
    "price_max",
)
_PROVIDER_KEYS = set(_PROVIDER_REQUIRED) | {"price_min"}
_CROSS_KEYS = {"beta", "gamma"}
_TOL_KEYS = {"root_tol", "lin_tol", "fd_step", "fixpoint_tol", "max_iter"}

RESULT_COLUMNS = (
    "provider", "price", "qos", "demand", "capacity", "profit", "price_foc_residual", "qos_foc_residual",
)


class ScenarioParseError(CloudMarketError, ValueError):
    pass


def fmt(value) -> str:
    """12 significant digits, the precision of every emitted number."""
    value = float(value)
    if value == 0.0:
        return "0"
    return f"{value:.12g}"


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _check_keys(obj, allowed, where: str, strict: bool, warn) -> None:
    if not isinstance(obj, dict):
        raise ScenarioParseError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        message = f"{where}: unknown field(s) {', '.join(unknown)}"
        if strict:
            raise ScenarioParseError(message)
        warn(message)


def _matrix(value, n: int, where: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != n or any(not isinstance(r, list) or len(r) != n for r in value):
        raise ScenarioParseError(f"{where}: expected a {n}x{n} row-major matrix")
    return np.array([[_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(value)])


def _stderr_warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def scenario_from_dict(doc, strict: bool = False, warn=_stderr_warn) -> tuple[MarketScenario, ToleranceConfig]:
    _check_keys(doc, _TOP_KEYS, "scenario", strict, warn)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioParseError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")

    mkt = doc.get("market")
    _check_keys(mkt, _MARKET_KEYS, "market", strict, warn)
    if "rt_bar" not in mkt:
        raise ScenarioParseError("market.rt_bar is required")
    rt_bar = _number(mkt["rt_bar"], "market.rt_bar")
    measure_doc = mkt.get("measure", {"mode": "expected"})
    _check_keys(measure_doc, _MEASURE_KEYS, "market.measure", strict, warn)
    mode = measure_doc.get("mode", "expected")
    if mode == "expected":
        measure = Measure()
    elif mode == "percentile":
        if "phi" not in measure_doc:
            raise ScenarioParseError("market.measure.phi is required in percentile mode")
        measure = Measure(_number(measure_doc["phi"], "market.measure.phi"))
    else:
        raise ScenarioParseError(f"market.measure.mode must be 'expected' or 'percentile', got {mode!r}")

    plist = doc.get("providers")
    if not isinstance(plist, list) or not plist:
        raise ScenarioParseError("providers must be a non-empty list")
    providers = []
    for k, p in enumerate(plist):
        where = f"providers[{k}]"
        _check_keys(p, _PROVIDER_KEYS, where, strict, warn)
        missing = [key for key in _PROVIDER_REQUIRED if key not in p]
        if missing:
            raise ScenarioParseError(f"{where}: missing field(s) {', '.join(missing)}")
        if isinstance(p["id"], bool) or not isinstance(p["id"], int):
            raise ScenarioParseError(f"{where}.id: expected an integer")
        providers.append(ProviderParams(
            id=p["id"],
            cost_per_request=_number(p["cost_per_request"], f"{where}.cost_per_request"),
            cost_per_capacity=_number(p["cost_per_capacity"], f"{where}.cost_per_capacity"),
            own_price_sensitivity=_number(p["own_price_sensitivity"], f"{where}.own_price_sensitivity"),
            qos_attraction=QosAttraction(
                _number(p["qos_base"], f"{where}.qos_base"),
                _number(p["qos_log_coeff"], f"{where}.qos_log_coeff"),
            ),
            price_max=_number(p["price_max"], f"{where}.price_max"),
            price_floor=_number(p["price_min"], f"{where}.price_min") if "price_min" in p else None,
        ))
    n = len(providers)

    cross_doc = doc.get("cross", {})
    _check_keys(cross_doc, _CROSS_KEYS, "cross", strict, warn)
    beta = _matrix(cross_doc["beta"], n, "cross.beta") if "beta" in cross_doc else np.zeros((n, n))
    gamma = _matrix(cross_doc["gamma"], n, "cross.gamma") if "gamma" in cross_doc else np.zeros((n, n))

    tol_doc = doc.get("tolerances", {})
    _check_keys(tol_doc, _TOL_KEYS, "tolerances", strict, warn)
    try:
        tol = ToleranceConfig().with_overrides(**{
            key: (int(v) if key == "max_iter" else _number(v, f"tolerances.{key}")) for key, v in tol_doc.items()
            if key in _TOL_KEYS
        })
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"tolerances: {exc}") from exc

    return MarketScenario(tuple(providers), CrossEffects(beta, gamma), rt_bar, measure), tol


def load_document(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON ({exc})") from exc


def load_scenario(path, strict: bool = False, warn=_stderr_warn):
    return scenario_from_dict(load_document(path), strict=strict, warn=warn)


def scenario_to_dict(scenario: MarketScenario, tol: ToleranceConfig | None = None) -> dict:
    providers = []
    for p in scenario.providers:
        entry = {
            "id": p.id,
            "cost_per_request": p.cost_per_request,
            "cost_per_capacity": p.cost_per_capacity,
            "own_price_sensitivity": p.own_price_sensitivity,
            "qos_base": p.qos_attraction.base,
            "qos_log_coeff": p.qos_attraction.log_coeff,
            "price_max": p.price_max,
        }
        if p.price_floor is not None:
            entry["price_min"] = p.price_floor
        providers.append(entry)
    measure = {"mode": scenario.measure.mode}
    if scenario.measure.phi is not None:
        measure["phi"] = scenario.measure.phi
    doc = {
        "schema_version": SCHEMA_VERSION,
        "market": {"rt_bar": scenario.rt_bar, "measure": measure},
        "providers": providers,
        "cross": {"beta": scenario.cross.beta.tolist(), "gamma": scenario.cross.gamma.tolist()},
    }
    if tol is not None:
        doc["tolerances"] = {
            "root_tol": tol.root_tol, "lin_tol": tol.lin_tol, "fd_step": tol.fd_step,
            "fixpoint_tol": tol.fixpoint_tol, "max_iter": tol.max_iter,
        }
    return doc


def dump_scenario(scenario: MarketScenario, path, tol: ToleranceConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario, tol), fh, indent=2)
        fh.write("\n")


def format_result_table(result: EquilibriumResult, scenario: MarketScenario) -> str:
    meta = result.meta
    out = io.StringIO()
    out.write(f"# game={meta.game}\n")
    out.write(f"# unique={meta.unique}\n")
    out.write(f"# iterations={meta.iterations}\n")
    out.write(f"# converged={'true' if meta.converged else 'false'}\n")
    out.write(f"# selected_rule={meta.selected_rule}\n")
    out.write(f"# measure={scenario.measure.mode}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for i, p in enumerate(scenario.providers):
        row = [result.prices[i], result.qos[i], result.demands[i], result.capacities[i], result.profits[i],
               result.price_residuals[i], result.qos_residuals[i]]
        if not all(math.isfinite(v) for v in row):
            raise ValueError(f"non-finite value in result row for provider {p.id}")
        writer.writerow([p.id, *map(fmt, row)])
    return out.getvalue()


def parse_result_table(text: str) -> tuple[dict, list[dict]]:
    """Metadata and rows of a result table written by ``format_result_table``."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is None or tuple(reader.fieldnames) != RESULT_COLUMNS:
        raise ScenarioParseError(f"result table header must be {','.join(RESULT_COLUMNS)}")
    rows = []
    for row in reader:
        try:
            rows.append({k: (int(v) if k == "provider" else float(v)) for k, v in row.items()})
        except (TypeError, ValueError) as exc:
            raise ScenarioParseError(f"malformed result row {row}") from exc
    return meta, rows


def load_result_profile(path, scenario: MarketScenario) -> tuple[dict, StrategyProfile]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    meta, rows = parse_result_table(text)
    by_id = {row["provider"]: row for row in rows}
    ids = [p.id for p in scenario.providers]
    if sorted(by_id) != sorted(ids) or len(rows) != len(ids):
        raise ScenarioParseError(f"result providers {sorted(by_id)} do not match scenario providers {ids}")
    prices = [by_id[i]["price"] for i in ids]
    qos = [by_id[i]["qos"] for i in ids]
    return meta, StrategyProfile(np.array(prices), np.array(qos))


def apply_axis(doc: dict, extra: dict, axis: str, value: float) -> tuple[dict, dict]:
    """Set the scalar named by ``axis`` in a scenario document or extra vectors.

    Paths: providers[k].<field>, cross.beta[i][j], cross.gamma[i][j],
    market.rt_bar, market.phi, qos[k], prices[k].
    """
    doc = copy.deepcopy(doc)
    extra = {k: list(v) for k, v in extra.items()}
    m = re.fullmatch(r"providers\[(\d+)\]\.(\w+)", axis)
    if m:
        k, name = int(m.group(1)), m.group(2)
        providers = doc.get("providers", [])
        if k >= len(providers) or name not in _PROVIDER_KEYS - {"id"}:
            raise KeyError(axis)
        providers[k][name] = value
        return doc, extra
    m = re.fullmatch(r"cross\.(beta|gamma)\[(\d+)\]\[(\d+)\]", axis)
    if m:
        name, i, j = m.group(1), int(m.group(2)), int(m.group(3))
        n = len(doc.get("providers", []))
        if i >= n or j >= n:
            raise KeyError(axis)
        cross = doc.setdefault("cross", {})
        matrix = cross.setdefault(name, [[0.0] * n for _ in range(n)])
        matrix[i][j] = value
        return doc, extra
    if axis == "market.rt_bar":
        doc["market"]["rt_bar"] = value
        return doc, extra
    if axis == "market.phi":
        doc["market"]["measure"] = {"mode": "percentile", "phi": value}
        return doc, extra
    m = re.fullmatch(r"(qos|prices)\[(\d+)\]", axis)
    if m:
        name, k = m.group(1), int(m.group(2))
        if name not in extra or k >= len(extra[name]):
            raise KeyError(axis)
        extra[name][k] = value
        return doc, extra
    raise KeyError(axis)
