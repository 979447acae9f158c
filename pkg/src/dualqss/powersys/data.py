"""Reader for the plain-text network model format.

A model file is split into sections. ``[system]`` holds ``key = value``
pairs; the other sections are whitespace-separated tables, one row per
line, with ``#`` starting a comment::

    [system]
    name = example
    base_mva = 100      # MVA
    frequency = 60      # Hz

    [bus]
    # id  type   v_set  angle_deg
    1     slack  1.04   0.0        # type: slack | pv | pq | inf
    2     pq     1.0    0.0

    [line]
    # id   from  to  r      x       b       (per unit, b is total charging)
    L12    1     2   0.01   0.085   0.176

    [machine]
    # bus  H[s]   D[pu]  xd_prime[pu]  p_gen[pu]   (p_gen ignored on slack)
    1      23.64  47.28  0.0608        0.0

    [load]
    # bus  p[pu]  q[pu]
    2      1.25   0.50

Buses of type ``inf`` are infinite buses: their voltage is fixed at
``v_set`` angle ``angle_deg`` and they carry no algebraic unknowns.
"""
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError

BUS_TYPES = ("slack", "pv", "pq", "inf")


@dataclass
class Bus:
    id: str
    type: str
    v_set: float = 1.0
    angle_deg: float = 0.0


@dataclass
class Line:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    b: float = 0.0


@dataclass
class Machine:
    bus: str
    H: float
    D: float
    xd_prime: float
    p_gen: float = 0.0


@dataclass
class Load:
    bus: str
    p: float
    q: float


@dataclass
class NetworkData:
    name: str = ""
    base_mva: float = 100.0
    frequency: float = 60.0
    buses: list = field(default_factory=list)
    lines: list = field(default_factory=list)
    machines: list = field(default_factory=list)
    loads: list = field(default_factory=list)

    def bus_ids(self):
        return [b.id for b in self.buses]

    def line(self, line_id):
        for ln in self.lines:
            if ln.id == str(line_id):
                return ln
        raise DataError(f"unknown line {line_id!r}")

    def validate(self) -> "NetworkData":
        ids = self.bus_ids()
        if len(set(ids)) != len(ids):
            raise DataError("duplicate bus id")
        known = set(ids)
        for b in self.buses:
            if b.type not in BUS_TYPES:
                raise DataError(f"bus {b.id}: unknown type {b.type!r}")
        if not any(b.type in ("slack", "inf") for b in self.buses):
            raise DataError("network needs a slack or infinite bus")
        lids = [ln.id for ln in self.lines]
        if len(set(lids)) != len(lids):
            raise DataError("duplicate line id")
        for ln in self.lines:
            if ln.from_bus not in known or ln.to_bus not in known:
                raise DataError(f"line {ln.id}: unknown terminal bus")
            if ln.r == 0.0 and ln.x == 0.0:
                raise DataError(f"line {ln.id}: zero impedance")
        if not self.machines:
            raise DataError("no machines")
        for mc in self.machines:
            if mc.bus not in known:
                raise DataError(f"machine at unknown bus {mc.bus!r}")
            if not mc.H > 0:
                raise DataError(f"machine at bus {mc.bus}: H must be positive")
            if not mc.xd_prime > 0:
                raise DataError(f"machine at bus {mc.bus}: xd_prime must be positive")
            if mc.D < 0:
                raise DataError(f"machine at bus {mc.bus}: negative damping")
            btype = self.buses[ids.index(mc.bus)].type
            if btype not in ("slack", "pv"):
                raise DataError(f"machine at bus {mc.bus} must sit on a slack or pv bus")
        if len({mc.bus for mc in self.machines}) != len(self.machines):
            raise DataError("at most one machine per bus")
        for ld in self.loads:
            if ld.bus not in known:
                raise DataError(f"load at unknown bus {ld.bus!r}")
            if ld.p < 0:
                raise DataError(f"load at bus {ld.bus}: negative active power")
        return self


_COLUMNS = {
    "bus": (Bus, [str, str, float, float], 2),
    "line": (Line, [str, str, str, float, float, float], 5),
    "machine": (Machine, [str, float, float, float, float], 4),
    "load": (Load, [str, float, float], 3),
}

_LISTS = {"bus": "buses", "line": "lines", "machine": "machines", "load": "loads"}


def parse_network(text: str) -> NetworkData:
    data = NetworkData()
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section != "system" and section not in _COLUMNS:
                raise DataError(f"line {lineno}: unknown section [{section}]")
            continue
        if section is None:
            raise DataError(f"line {lineno}: data before any section")
        if section == "system":
            if "=" not in line:
                raise DataError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key == "name":
                data.name = val
            elif key in ("base_mva", "frequency"):
                setattr(data, key, float(val))
            else:
                raise DataError(f"line {lineno}: unknown system key {key!r}")
            continue
        cls, types, required = _COLUMNS[section]
        parts = line.split()
        if not (required <= len(parts) <= len(types)):
            raise DataError(f"line {lineno}: [{section}] expects {required}..{len(types)} fields")
        try:
            values = [tp(v) for tp, v in zip(types, parts)]
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
        if section == "bus":
            values[1] = values[1].lower()
        getattr(data, _LISTS[section]).append(cls(*values))
    return data.validate()


def load_network(path) -> NetworkData:
    return parse_network(Path(path).read_text())
