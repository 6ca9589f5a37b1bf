"""Temperature-dependent thermophysical properties of IN625 and process constants.

Internal unit policy: mm, s, g, W, degC. Heat-transfer coefficients are
stored in W/(mm^2 degC); configuration files carry the conventional
W/(m^2 degC) value and are converted once at load time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROPERTY_KINDS = ("conductivity", "expansion", "specific_heat")

# IN625 property curves (Netfabb library values).
# (T degC, k W/mm/degC)
IN625_CONDUCTIVITY = (
    (25.0, 0.01),
    (200.0, 0.0125),
    (300.0, 0.014),
    (400.0, 0.015),
    (500.0, 0.016),
    (600.0, 0.018),
    (800.0, 0.022),
    (900.0, 0.024),
    (1000.0, 0.025),
    (1200.0, 0.0255),
)
# (T degC, alpha mm/mm/degC)
IN625_EXPANSION = (
    (20.0, 1.28e-05),
    (93.0, 1.28e-05),
    (204.0, 1.31e-05),
    (316.0, 1.33e-05),
    (427.0, 1.37e-05),
    (538.0, 1.40e-05),
    (649.0, 1.48e-05),
    (760.0, 1.53e-05),
    (871.0, 1.58e-05),
    (927.0, 1.62e-05),
)
# (T degC, C_p J/g/degC)
IN625_SPECIFIC_HEAT = (
    (25.0, 0.405),
    (200.0, 0.46),
    (300.0, 0.48),
    (400.0, 0.5),
    (500.0, 0.525),
    (600.0, 0.55),
    (800.0, 0.6),
    (900.0, 0.63),
    (1000.0, 0.65),
    (1200.0, 0.68),
)

# Nominal handbook density for IN625; the property library does not carry one.
IN625_DENSITY = 8.44e-3  # g/mm^3


@dataclass(frozen=True)
class MaterialTable:
    """Piecewise-linear property curves plus a constant density.

    Each point list is (temperature degC, value) sorted strictly increasing
    in temperature. Use :func:`validate_table` to obtain diagnostics for a
    table built from untrusted input.
    """

    conductivity_points: tuple[tuple[float, float], ...]
    expansion_points: tuple[tuple[float, float], ...]
    specific_heat_points: tuple[tuple[float, float], ...]
    density: float

    @classmethod
    def in625(cls, density: float = IN625_DENSITY) -> "MaterialTable":
        return cls(
            conductivity_points=IN625_CONDUCTIVITY,
            expansion_points=IN625_EXPANSION,
            specific_heat_points=IN625_SPECIFIC_HEAT,
            density=density,
        )

    @classmethod
    def constant(
        cls,
        conductivity: float,
        specific_heat: float,
        density: float,
        expansion: float = 1.3e-5,
    ) -> "MaterialTable":
        """Temperature-independent table (two identical points per curve)."""
        return cls(
            conductivity_points=((0.0, conductivity), (5000.0, conductivity)),
            expansion_points=((0.0, expansion), (5000.0, expansion)),
            specific_heat_points=((0.0, specific_heat), (5000.0, specific_heat)),
            density=density,
        )

    def points_for(self, which: str) -> tuple[tuple[float, float], ...]:
        if which == "conductivity":
            return self.conductivity_points
        if which == "expansion":
            return self.expansion_points
        if which == "specific_heat":
            return self.specific_heat_points
        raise ValueError(f"unknown property kind {which!r}; expected one of {PROPERTY_KINDS}")


@dataclass(frozen=True)
class ProcessParams:
    """Fixed process constants for the build.

    ``effective_htc`` is the combined convection+linearized-radiation
    coefficient acting on surfaces exposed to ambient; ``substrate_htc`` is
    the bottom-face heat-sinking coefficient pulling the plate toward the
    substrate temperature. Both in W/(mm^2 degC).
    """

    scan_speed: float = 1200.0  # mm/s
    laser_radius: float = 0.05  # mm
    power: float = 195.0  # W
    absorptivity: float = 0.4
    substrate_temperature: float = 80.0  # degC
    ambient_temperature: float = 25.0  # degC
    effective_htc: float = 2.5e-5  # W/(mm^2 degC)  (= 25 W/(m^2 degC))
    plate_thickness: float = 0.02  # mm
    substrate_htc: float = 2.0e-3  # W/(mm^2 degC)

    def __post_init__(self) -> None:
        positive = {
            "scan_speed": self.scan_speed,
            "laser_radius": self.laser_radius,
            "power": self.power,
            "plate_thickness": self.plate_thickness,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        # Zero coefficients are allowed so insulated configurations exist.
        if self.effective_htc < 0.0 or self.substrate_htc < 0.0:
            raise ValueError("heat transfer coefficients must be >= 0")
        if not 0.0 < self.absorptivity <= 1.0:
            raise ValueError(f"absorptivity must be in (0, 1], got {self.absorptivity}")
        if self.substrate_temperature < 0.0 or self.ambient_temperature < 0.0:
            raise ValueError("temperatures must be >= 0 degC")


def interpolate_property(table: MaterialTable, which: str, temperature) -> float | np.ndarray:
    """Piecewise-linear property lookup, clamped to the endpoints.

    ``temperature`` may be a scalar or an array; the return type follows.
    """
    points = table.points_for(which)
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    result = np.interp(temperature, xs, ys)
    if np.isscalar(temperature):
        return float(result)
    return result


def property_arrays(table: MaterialTable, which: str) -> tuple[np.ndarray, np.ndarray]:
    """(temperatures, values) arrays for repeated vectorized interpolation."""
    points = table.points_for(which)
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    return xs, ys


def _check_points(name: str, points, report: list[str]) -> None:
    if len(points) < 2:
        report.append(f"{name}: fewer than 2 points")
    for i, (t, v) in enumerate(points):
        if i > 0 and not t > points[i - 1][0]:
            report.append(f"{name}: non-increasing temperature at index {i}")
        if not v > 0.0:
            report.append(f"{name}: non-positive value at index {i}")


def validate_table(table: MaterialTable) -> list[str]:
    """Diagnostics for every violated table invariant; empty when valid."""
    report: list[str] = []
    _check_points("conductivity", table.conductivity_points, report)
    _check_points("expansion", table.expansion_points, report)
    _check_points("specific_heat", table.specific_heat_points, report)
    if not table.density > 0.0:
        report.append(f"density: non-positive value {table.density}")
    return report
