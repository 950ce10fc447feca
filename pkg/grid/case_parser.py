"""
Case file parsing.
Reads MATPOWER `.m` cases and the toolkit's JSON mirror into a GridCase.

Only the columns the solvers need are read; extra columns are ignored so
richer case files load unchanged. Out-of-service branches are dropped at load
time and the remaining ones are numbered 1..N in file order.
"""

import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Union

from config import CASE_FILE_ENCODING
from errors import MalformedCase
from grid.grid_case import Branch, Bus, BusKind, Generator, GridCase, MATPOWER_BUS_KINDS

logger = logging.getLogger(__name__)

# Minimum column counts (MATPOWER column order)
BUS_COLUMNS = 9      # BUS_I BUS_TYPE PD QD GS BS BUS_AREA VM VA
GEN_COLUMNS = 8      # GEN_BUS PG QG QMAX QMIN VG MBASE GEN_STATUS
BRANCH_COLUMNS = 11  # F_BUS T_BUS BR_R BR_X BR_B RATE_A RATE_B RATE_C TAP SHIFT BR_STATUS

_BASE_MVA_PATTERN = re.compile(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;")
_SECTION_PATTERN = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.DOTALL)
_NAME_PATTERN = re.compile(r"function\s+mpc\s*=\s*(\w+)")


def parse_case(text: str) -> GridCase:
    """
    Parse case text in either supported format.

    Args:
        text: MATPOWER `.m` content or the JSON mirror

    Returns:
        Validated GridCase

    Raises:
        MalformedCase: Unparseable content or a missing matrix
        DanglingReference: A branch or generator references an unknown bus
        NoSlackBus: No reference bus
    """
    if text.lstrip().startswith("{"):
        return _parse_json(text)
    return _parse_matpower(text)


def load_case(path: Union[str, Path]) -> GridCase:
    """
    Read and parse a case file.

    Args:
        path: Location of a `.m` or `.json` case

    Returns:
        Validated GridCase named after the file stem when the text has no name

    Raises:
        FileNotFoundError: If the file does not exist
        MalformedCase: As for parse_case
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Case file not found: {path}")
    case = parse_case(path.read_text(encoding=CASE_FILE_ENCODING))
    if not case.name:
        case = GridCase(case.base_mva, case.buses, case.branches, case.gens, name=path.stem)
    logger.info("Loaded case %s: %d buses, %d branches, %d generators",
                case.name, len(case.buses), case.n_lines, len(case.gens))
    return case


def case_to_json(case: GridCase) -> str:
    """
    Serialize a case to the JSON mirror.

    Args:
        case: Case to serialize

    Returns:
        Deterministic JSON text (sorted keys, two-space indent)
    """
    payload = {
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": [{**bus.__dict__, "kind": bus.kind.value} for bus in case.buses],
        "branches": [dict(branch.__dict__) for branch in case.branches],
        "gens": [dict(gen.__dict__) for gen in case.gens],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


# ============================
# MATPOWER format
# ============================

def _parse_matpower(text: str) -> GridCase:
    base_match = _BASE_MVA_PATTERN.search(text)
    if base_match is None:
        raise MalformedCase("Missing 'mpc.baseMVA' assignment")
    try:
        base_mva = float(base_match.group(1))
    except ValueError:
        raise MalformedCase(f"Invalid baseMVA value '{base_match.group(1)}'")

    sections = _extract_sections(text)
    for required in ("bus", "gen", "branch"):
        if required not in sections:
            raise MalformedCase(f"Missing 'mpc.{required}' matrix")

    bus_rows = _numeric_rows(sections["bus"], "bus", BUS_COLUMNS)
    gen_rows = _numeric_rows(sections["gen"], "gen", GEN_COLUMNS)
    branch_rows = _numeric_rows(sections["branch"], "branch", BRANCH_COLUMNS)

    gens = [
        Generator(
            bus=int(row[0]), p_out=row[1], q_out=row[2], q_max=row[3], q_min=row[4],
            v_setpoint=row[5], status=int(row[7]),
        )
        for row in gen_rows
    ]
    gens = [gen for gen in gens if gen.status > 0]
    gen_buses = {gen.bus for gen in gens}

    buses = []
    for row_num, row in enumerate(bus_rows, start=1):
        code = int(row[1])
        if code == 4:
            # isolated buses carry no flow and are skipped
            logger.debug("Skipping isolated bus %d", int(row[0]))
            continue
        if code not in MATPOWER_BUS_KINDS:
            raise MalformedCase(f"bus row {row_num}: unknown bus type {code}")
        kind = MATPOWER_BUS_KINDS[code]
        if kind == BusKind.PV and int(row[0]) not in gen_buses:
            kind = BusKind.PQ
        buses.append(Bus(
            id=int(row[0]), kind=kind, p_demand=row[2], q_demand=row[3],
            g_shunt=row[4], b_shunt=row[5], v_mag=row[7], v_ang=math.radians(row[8]),
        ))

    branches = []
    for row in branch_rows:
        if int(row[10]) <= 0:
            continue
        branches.append(Branch(
            index=len(branches) + 1, from_bus=int(row[0]), to_bus=int(row[1]),
            r=row[2], x=row[3], b_charging=row[4], rate_a=row[5],
            tap=row[8], shift=row[9], status=1,
        ))

    name_match = _NAME_PATTERN.search(text)
    return GridCase(
        base_mva=base_mva,
        buses=tuple(buses),
        branches=tuple(branches),
        gens=tuple(gens),
        name=name_match.group(1) if name_match else "",
    )


def _extract_sections(text: str) -> Dict[str, List[str]]:
    """
    Collect the row strings of every `mpc.<name> = [ ... ];` matrix.

    Args:
        text: Full case text

    Returns:
        Mapping of section name to its non-empty, comment-free rows
    """
    sections: Dict[str, List[str]] = {}
    for match in _SECTION_PATTERN.finditer(text):
        rows: List[str] = []
        for line in match.group(2).splitlines():
            line = re.sub(r"%.*$", "", line)
            for chunk in line.split(";"):
                chunk = chunk.strip()
                if chunk:
                    rows.append(chunk)
        sections[match.group(1)] = rows
    return sections


def _numeric_rows(rows: List[str], section: str, min_columns: int) -> List[List[float]]:
    """
    Convert row strings to floats, checking the column count.

    Raises:
        MalformedCase: A row has too few columns or a non-numeric field
    """
    parsed: List[List[float]] = []
    for row_num, row in enumerate(rows, start=1):
        fields = row.replace(",", " ").split()
        if len(fields) < min_columns:
            raise MalformedCase(
                f"{section} row {row_num} has {len(fields)} columns, expected at least {min_columns}"
            )
        try:
            parsed.append([float(value) for value in fields])
        except ValueError:
            raise MalformedCase(f"{section} row {row_num} contains a non-numeric field")
    if not parsed:
        raise MalformedCase(f"'mpc.{section}' matrix is empty")
    return parsed


# ============================
# JSON mirror
# ============================

def _parse_json(text: str) -> GridCase:
    try:
        payload: Dict[str, Any] = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedCase(f"Invalid JSON case: {e}")
    for key in ("base_mva", "buses", "branches", "gens"):
        if key not in payload:
            raise MalformedCase(f"JSON case is missing '{key}'")

    try:
        buses = tuple(
            Bus(**{**entry, "kind": BusKind(entry["kind"])}) for entry in payload["buses"]
        )
        branches = [Branch(**entry) for entry in payload["branches"]]
        gens = tuple(Generator(**entry) for entry in payload["gens"])
    except (TypeError, KeyError, ValueError) as e:
        raise MalformedCase(f"Invalid JSON case entry: {e}")

    in_service = [branch for branch in branches if branch.status == 1]
    renumbered = tuple(
        Branch(**{**branch.__dict__, "index": position})
        for position, branch in enumerate(in_service, start=1)
    )
    return GridCase(
        base_mva=float(payload["base_mva"]),
        buses=buses,
        branches=renumbered,
        gens=tuple(gen for gen in gens if gen.status > 0),
        name=payload.get("name", ""),
    )
