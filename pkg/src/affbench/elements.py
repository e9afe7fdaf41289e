"""Periodic-table lookups used by the parsers and descriptors."""

from __future__ import annotations

SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe "
    "Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg "
    "Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg "
    "Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og"
).split()

_BY_SYMBOL = {s.upper(): z for z, s in enumerate(SYMBOLS, start=1)}
# Deuterium / tritium appear in some deposited structures.
_BY_SYMBOL["D"] = 1
_BY_SYMBOL["T"] = 1

# IUPAC conventional standard atomic weights.
ATOMIC_WEIGHTS = {
    1: 1.008, 2: 4.0026, 3: 6.94, 4: 9.0122, 5: 10.81, 6: 12.011, 7: 14.007,
    8: 15.999, 9: 18.998, 10: 20.180, 11: 22.990, 12: 24.305, 13: 26.982,
    14: 28.085, 15: 30.974, 16: 32.06, 17: 35.45, 18: 39.95, 19: 39.098,
    20: 40.078, 21: 44.956, 22: 47.867, 23: 50.942, 24: 51.996, 25: 54.938,
    26: 55.845, 27: 58.933, 28: 58.693, 29: 63.546, 30: 65.38, 31: 69.723,
    32: 72.630, 33: 74.922, 34: 78.971, 35: 79.904, 36: 83.798, 37: 85.468,
    38: 87.62, 39: 88.906, 40: 91.224, 41: 92.906, 42: 95.95, 44: 101.07,
    45: 102.91, 46: 106.42, 47: 107.87, 48: 112.41, 49: 114.82, 50: 118.71,
    51: 121.76, 52: 127.60, 53: 126.90, 54: 131.29, 55: 132.91, 56: 137.33,
    57: 138.91, 58: 140.12, 64: 157.25, 74: 183.84, 75: 186.21, 76: 190.23,
    77: 192.22, 78: 195.08, 79: 196.97, 80: 200.59, 81: 204.38, 82: 207.2,
    83: 208.98, 92: 238.03,
}

H, C, N, O, F, P, S, CL, BR, I = 1, 6, 7, 8, 9, 15, 16, 17, 35, 53
HALOGENS = frozenset({F, CL, BR, I})


def atomic_number(symbol: str) -> int:
    """Atomic number for an element symbol (case-insensitive)."""
    z = _BY_SYMBOL.get(symbol.strip().upper())
    if z is None:
        raise KeyError(f"unknown element symbol {symbol!r}")
    return z


def symbol(z: int) -> str:
    if not 1 <= z <= len(SYMBOLS):
        raise KeyError(f"atomic number out of range: {z}")
    return SYMBOLS[z - 1]


def atomic_weight(z: int) -> float:
    try:
        return ATOMIC_WEIGHTS[z]
    except KeyError:
        raise KeyError(f"no standard atomic weight tabulated for Z={z}") from None
