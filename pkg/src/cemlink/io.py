"""Config and series ingestion.

A scenario config is YAML with a ``system`` table (zones, resources, lines,
policies, series file names) and optional ``reduction``/``model``/``solver``
tables consumed by the scenario layer. Hourly series live in CSV files:
header row required, first column the hour index 0..hours-1, one column per
zone (demand) or per VRE resource (capacity factors).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import yaml

from .system import (
    EmissionsPolicy,
    EnergySystem,
    Resource,
    StorageParams,
    TransmissionLine,
    ValidationReport,
    Zone,
    validate_system,
)


class IngestError(Exception):
    pass


class MissingFile(IngestError):
    def __init__(self, path):
        self.path = Path(path)
        super().__init__(f"missing file: {path}")


class ParseError(IngestError):
    def __init__(self, message, file=None, line=None, fieldname=None):
        self.file = file
        self.line = line
        self.fieldname = fieldname
        loc = f"{file}" + (f":{line}" if line else "") + (f" field {fieldname!r}" if fieldname else "")
        super().__init__(f"{loc}: {message}" if loc else message)


class LengthMismatch(IngestError):
    def __init__(self, series_id, expected, got):
        self.series_id = series_id
        self.expected = expected
        self.got = got
        super().__init__(f"series {series_id!r}: expected {expected} rows, got {got}")


class InvariantViolation(IngestError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(f"system invalid:\n{report}")


def read_series_csv(path: Path, hours: int) -> dict[str, np.ndarray]:
    """Read an hour-indexed series table; one named column per series."""
    if not path.exists():
        raise MissingFile(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", file=str(path), line=1) from None
        if len(header) < 2:
            raise ParseError("need an hour column plus at least one series", file=str(path), line=1)
        names = [h.strip() for h in header[1:]]
        cols: list[list[float]] = [[] for _ in names]
        count = 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                                 file=str(path), line=line_no)
            try:
                hour = int(row[0])
            except ValueError:
                raise ParseError(f"bad hour index {row[0]!r}", file=str(path), line=line_no,
                                 fieldname=header[0]) from None
            if hour != count:
                raise ParseError(f"hour index {hour} out of order (expected {count})",
                                 file=str(path), line=line_no, fieldname=header[0])
            for k, cell in enumerate(row[1:]):
                try:
                    cols[k].append(float(cell))
                except ValueError:
                    raise ParseError(f"bad numeric value {cell!r}", file=str(path),
                                     line=line_no, fieldname=names[k]) from None
            count += 1
    out = {}
    for name, col in zip(names, cols):
        if len(col) != hours:
            raise LengthMismatch(name, hours, len(col))
        out[name] = np.asarray(col, dtype=float)
    return out


def _opt_float(table, key, default=0.0):
    v = table.get(key, default)
    if v is None:
        return default
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "unbounded", ".inf"):
            return math.inf
        try:
            return float(s)
        except ValueError:
            raise ParseError(f"bad numeric value {v!r}", fieldname=key) from None
    return float(v)


def _parse_policy(table) -> EmissionsPolicy:
    if not table:
        return EmissionsPolicy.none()
    kind = str(table.get("kind", "none")).lower()
    if kind == "none":
        return EmissionsPolicy.none()
    if kind == "cap":
        return EmissionsPolicy.cap(_opt_float(table, "tons", math.inf))
    if kind == "price":
        return EmissionsPolicy.price(_opt_float(table, "per_ton", 0.0))
    raise ParseError(f"unknown emissions policy kind {kind!r}", fieldname="emissions_policy")


def _parse_resource(table) -> Resource:
    try:
        rid = str(table["id"])
        kind = str(table["kind"]).lower()
        zone = str(table["zone"])
    except KeyError as exc:
        raise ParseError(f"resource missing required key {exc}", fieldname="resources") from None
    sp = None
    if "storage" in table and table["storage"] is not None:
        st = table["storage"]
        try:
            sp = StorageParams(
                charge_efficiency=float(st["charge_efficiency"]),
                discharge_efficiency=float(st["discharge_efficiency"]),
                self_discharge=_opt_float(st, "self_discharge", 0.0),
                duration=None if st.get("duration") is None else float(st["duration"]),
                is_ldes=bool(st.get("is_ldes", False)),
                symmetric=bool(st.get("symmetric", True)),
            )
        except KeyError as exc:
            raise ParseError(f"storage params for {rid!r} missing key {exc}", fieldname="storage") from None
    return Resource(
        id=rid,
        zone=zone,
        kind=kind,
        fixed_cost=_opt_float(table, "fixed_cost"),
        variable_cost=_opt_float(table, "variable_cost"),
        energy_cost=_opt_float(table, "energy_cost"),
        emissions_rate=_opt_float(table, "emissions_rate"),
        crm_derate=_opt_float(table, "crm_derate", 0.95),
        max_capacity=_opt_float(table, "max_capacity", math.inf),
        existing_capacity=_opt_float(table, "existing_capacity"),
        tech=table.get("tech"),
        storage=sp,
    )


def load_config(config_path: str | Path) -> dict:
    config_path = Path(config_path)
    if not config_path.exists():
        raise MissingFile(config_path)
    try:
        doc = yaml.safe_load(config_path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc), file=str(config_path),
                         line=(mark.line + 1) if mark else None) from exc
    if not isinstance(doc, dict):
        raise ParseError("config root must be a mapping", file=str(config_path))
    return doc


def load_system(config_path: str | Path, data_dir: str | Path | None = None) -> EnergySystem:
    """Build and validate an EnergySystem from a config file and its CSV series."""
    config_path = Path(config_path)
    doc = load_config(config_path)
    table = doc.get("system", doc)
    data_dir = Path(data_dir) if data_dir is not None else config_path.parent

    try:
        hours = int(table["hours"])
    except KeyError:
        raise ParseError("missing 'hours'", file=str(config_path)) from None

    zones = []
    for zt in table.get("zones", []):
        try:
            zones.append(Zone(id=str(zt["id"]), member_of=zt.get("member_of")))
        except KeyError:
            raise ParseError("zone missing 'id'", file=str(config_path), fieldname="zones") from None
    resources = [_parse_resource(rt) for rt in table.get("resources", [])]
    lines = []
    for lt in table.get("lines", []):
        try:
            lines.append(TransmissionLine(
                id=str(lt["id"]),
                from_zone=str(lt["from_zone"]),
                to_zone=str(lt["to_zone"]),
                capacity=_opt_float(lt, "capacity"),
                expandable=bool(lt.get("expandable", False)),
                expansion_cost=_opt_float(lt, "expansion_cost"),
                loss_fraction=_opt_float(lt, "loss_fraction"),
            ))
        except KeyError as exc:
            raise ParseError(f"line missing key {exc}", file=str(config_path), fieldname="lines") from None

    demand_csv = table.get("demand_csv")
    if not demand_csv:
        raise ParseError("missing 'demand_csv'", file=str(config_path))
    demand = read_series_csv(data_dir / demand_csv, hours)

    vre_profiles: dict[str, np.ndarray] = {}
    if table.get("vre_profiles_csv"):
        vre_profiles = read_series_csv(data_dir / table["vre_profiles_csv"], hours)

    system = EnergySystem.build(
        zones=zones,
        resources=resources,
        lines=lines,
        demand=demand,
        vre_profiles=vre_profiles,
        hours=hours,
        crm_margin=_opt_float(table, "crm_margin", 0.0),
        emissions_policy=_parse_policy(table.get("emissions_policy")),
        voll=_opt_float(table, "voll", 50_000.0),
    )
    report = validate_system(system)
    if not report.ok:
        raise InvariantViolation(report)
    return system


def write_series_csv(path: Path, series: dict[str, np.ndarray], hours: int) -> None:
    names = list(series)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + names)
        for t in range(hours):
            writer.writerow([t] + [format(series[n][t], ".10g") for n in names])
