"""Port-cost normalization between folded-Clos, static-expander and rotor networks.

``alpha`` is the price of one rotor-network port relative to one static port.
A three-tier folded Clos with oversubscription ``F`` spends ``2(T-1)/F``
extra ports per host, so equal spend fixes ``F = 4 / alpha``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import InvalidParameterError

__all__ = [
    "CostParams",
    "SizingResult",
    "DEFAULT_PART_COSTS",
    "ROTOR_PARTS",
    "alpha_clos",
    "alpha_expander",
    "hosts_for_alpha",
    "clos_sizing",
    "alpha_from_parts",
    "amortize",
    "parts_to_csv",
    "parts_from_csv",
]

# component -> (static dollars, rotor dollars); None means the part is absent
DEFAULT_PART_COSTS: dict[str, tuple[float | None, float | None]] = {
    "SR transceiver": (80.0, 80.0),
    "Optical fiber": (45.0, 45.0),
    "ToR port": (90.0, 90.0),
    "Optical fiber array": (None, 30.0),
    "Optical lenses": (None, 15.0),
    "Beam-steering element": (None, 5.0),
    "Optical mapping": (None, 10.0),
}

# parts whose price is shared by every port of one rotor switch
ROTOR_PARTS = ("Optical fiber array", "Optical lenses", "Beam-steering element", "Optical mapping")
DEFAULT_ROTOR_PORTS = 512


@dataclass(frozen=True)
class CostParams:
    k: int
    T: int = 3
    F: float = 3.0
    u: int | None = None
    alpha: float | None = None
    part_costs: Mapping[str, tuple[float | None, float | None]] = field(
        default_factory=lambda: dict(DEFAULT_PART_COSTS)
    )

    def __post_init__(self):
        if self.T < 2:
            raise InvalidParameterError(f"T must be >= 2, got {self.T}")
        if self.F < 1:
            raise InvalidParameterError(f"F must be >= 1, got {self.F}")
        if self.u is not None and not 0 < self.u < self.k:
            raise InvalidParameterError(f"u must satisfy 0 < u < k, got u={self.u}, k={self.k}")
        if self.alpha is not None and self.alpha <= 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class SizingResult:
    """Exact and nearest buildable Clos sizing for one (k, alpha)."""

    k: int
    alpha: float
    F_exact: float
    hosts_exact: float
    F: int
    hosts: int

    @property
    def integral(self) -> bool:
        return math.isclose(self.F_exact, self.F) and math.isclose(self.hosts_exact, self.hosts)


def alpha_clos(T: int, F: float) -> float:
    if T < 2:
        raise InvalidParameterError(f"T must be >= 2, got {T}")
    if F <= 0:
        raise InvalidParameterError(f"F must be positive, got {F}")
    return 2 * (T - 1) / F


def alpha_expander(u: int, k: int) -> float:
    if not 0 < u < k:
        raise InvalidParameterError(f"need 0 < u < k, got u={u}, k={k}")
    return u / (k - u)


def _clos_hosts(k: int, F: float) -> float:
    return 4 * F / (F + 1) * (k / 2) ** 3


def clos_sizing(k: int, alpha: float) -> SizingResult:
    if k <= 0 or k % 2:
        raise InvalidParameterError(f"radix must be a positive even number, got {k}")
    if alpha <= 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    F_exact = 4.0 / alpha
    if F_exact < 1 - 1e-12:
        raise InvalidParameterError(f"alpha={alpha} gives F={F_exact:.4g} < 1")
    F = max(1, round(F_exact))
    return SizingResult(
        k=k,
        alpha=alpha,
        F_exact=F_exact,
        hosts_exact=_clos_hosts(k, F_exact),
        F=F,
        hosts=round(_clos_hosts(k, F)),
    )


def hosts_for_alpha(k: int, alpha: float) -> tuple[int, int]:
    """(F, H) of the nearest integral three-tier folded Clos costing the same."""
    r = clos_sizing(k, alpha)
    return r.F, r.hosts


def _totals(parts: Mapping[str, tuple[float | None, float | None]]) -> tuple[float, float]:
    if not parts:
        raise InvalidParameterError("empty part list")
    static = [v[0] for v in parts.values() if v[0] is not None]
    rotor = [v[1] for v in parts.values() if v[1] is not None]
    if not static:
        raise InvalidParameterError("no static-network components listed")
    if not rotor:
        raise InvalidParameterError("no rotor-network components listed")
    for name, (a, b) in parts.items():
        for v in (a, b):
            if v is not None and v < 0:
                raise InvalidParameterError(f"negative cost for {name!r}")
    return sum(static), sum(rotor)


def alpha_from_parts(parts: Mapping[str, tuple[float | None, float | None]] | None = None) -> float:
    """Rotor per-port total divided by static per-port total."""
    static, rotor = _totals(parts if parts is not None else DEFAULT_PART_COSTS)
    if static == 0:
        raise InvalidParameterError("static per-port cost is zero")
    return rotor / static


def amortize(
    parts: Mapping[str, tuple[float | None, float | None]],
    ports: int,
    base_ports: int = DEFAULT_ROTOR_PORTS,
    shared: tuple[str, ...] = ROTOR_PARTS,
) -> dict[str, tuple[float | None, float | None]]:
    """Rescale shared rotor parts from ``base_ports`` to ``ports`` ports per rotor switch."""
    if ports <= 0 or base_ports <= 0:
        raise InvalidParameterError("port counts must be positive")
    out = dict(parts)
    for name in shared:
        if name not in out:
            raise InvalidParameterError(f"missing component {name!r}")
        a, b = out[name]
        out[name] = (a, None if b is None else b * base_ports / ports)
    return out


def parts_to_csv(parts: Mapping[str, tuple[float | None, float | None]] | None = None) -> str:
    parts = parts if parts is not None else DEFAULT_PART_COSTS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "static_dollars", "opera_dollars"])
    for name, (a, b) in parts.items():
        w.writerow([name, "" if a is None else repr(a), "" if b is None else repr(b)])
    return buf.getvalue()


def parts_from_csv(path: str | Path) -> dict[str, tuple[float | None, float | None]]:
    out: dict[str, tuple[float | None, float | None]] = {}
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        need = {"component", "static_dollars", "opera_dollars"}
        if rows.fieldnames is None or not need <= set(rows.fieldnames):
            raise InvalidParameterError(f"{path}: header must contain {sorted(need)}")
        for row in rows:
            vals = []
            for key in ("static_dollars", "opera_dollars"):
                cell = (row[key] or "").strip()
                try:
                    vals.append(float(cell) if cell not in ("", "-") else None)
                except ValueError as exc:
                    raise InvalidParameterError(f"{path}: bad {key} for {row['component']!r}: {cell!r}") from exc
            out[row["component"]] = (vals[0], vals[1])
    return out
