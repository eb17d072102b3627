"""NACA 4-digit closed forms.

Generates the bundled coordinate files and doubles as an independent
oracle for the CST geometry tests (thickness polynomial, camber line).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

# Standard open-trailing-edge thickness polynomial coefficients.
_A = np.array([0.2969, -0.1260, -0.3516, 0.2843, -0.1015])


def parse_code(code: str) -> tuple[float, float, float]:
    """Split a 4-digit designation into (max camber, camber position, thickness)."""
    code = code.lower().removeprefix("naca")
    if len(code) != 4 or not code.isdigit():
        raise ValueError(f"not a 4-digit NACA code: {code!r}")
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    t = int(code[2:]) / 100.0
    return m, p, t


def thickness_distribution(x: np.ndarray, t: float) -> np.ndarray:
    """Half-thickness y_t(x) as a fraction of chord."""
    x = np.asarray(x, dtype=float)
    return 5.0 * t * (
        _A[0] * np.sqrt(x) + _A[1] * x + _A[2] * x**2 + _A[3] * x**3 + _A[4] * x**4
    )


def camber_line(x: np.ndarray, m: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Camber line y_c(x) and its slope; zero everywhere for symmetric sections."""
    x = np.asarray(x, dtype=float)
    yc = np.zeros_like(x)
    dyc = np.zeros_like(x)
    if m == 0.0 or p == 0.0:
        return yc, dyc
    fwd = x < p
    yc[fwd] = m / p**2 * (2 * p * x[fwd] - x[fwd] ** 2)
    dyc[fwd] = 2 * m / p**2 * (p - x[fwd])
    aft = ~fwd
    yc[aft] = m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x[aft] - x[aft] ** 2)
    dyc[aft] = 2 * m / (1 - p) ** 2 * (p - x[aft])
    return yc, dyc


def peak_thickness(t: float, n: int = 20001) -> float:
    """Maximum vertical thickness of the symmetric section, by dense search."""
    x = np.linspace(0.0, 1.0, n)
    return float(2.0 * thickness_distribution(x, t).max())


def coordinates(code: str, n_per_side: int = 81) -> np.ndarray:
    """Selig-ordered loop (upper TE -> LE -> lower TE) for a 4-digit section.

    Surface points are offset perpendicular to the camber line, matching how
    published coordinate files are constructed.
    """
    m, p, t = parse_code(code)
    beta = np.linspace(0.0, np.pi, n_per_side)
    x = 0.5 * (1.0 - np.cos(beta))
    yt = thickness_distribution(x, t)
    yc, dyc = camber_line(x, m, p)
    theta = np.arctan(dyc)
    xu = x - yt * np.sin(theta)
    yu = yc + yt * np.cos(theta)
    xl = x + yt * np.sin(theta)
    yl = yc - yt * np.cos(theta)
    upper = np.column_stack([xu[::-1], yu[::-1]])
    lower = np.column_stack([xl[1:], yl[1:]])
    return np.vstack([upper, lower])


def write_dat(path: str | Path, name: str, coords: np.ndarray) -> None:
    """Write a Selig-format coordinate file: name line then x-y pairs."""
    lines = [name]
    lines += [f"{x: .6f}  {y: .6f}" for x, y in np.asarray(coords)]
    Path(path).write_text("\n".join(lines) + "\n")
