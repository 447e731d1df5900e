"""Rational transfer functions in s and their frequency-domain analysis.

Coefficient convention (used everywhere in this package): lists are ordered
highest power of s first, e.g. ``num=[2, 1]`` means ``2s + 1``.  On
construction the representation is normalized: exact leading zeros are
trimmed and both polynomials are divided by the denominator's leading
coefficient, so algebraically equal inputs compare equal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NoCrossoverError, PoleEvaluationError

TWO_PI = 2.0 * math.pi


def _trim_leading_zeros(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    i = 0
    while i < len(c) - 1 and c[i] == 0.0:
        i += 1
    return tuple(c[i:])


def _trailing_zero_count(coeffs: tuple[float, ...]) -> int:
    n = 0
    while n < len(coeffs) - 1 and coeffs[len(coeffs) - 1 - n] == 0.0:
        n += 1
    return n


class TransferFunction:
    """Immutable SISO rational function num(s)/den(s)."""

    __slots__ = ("num", "den")

    def __init__(self, num: Sequence[float], den: Sequence[float]):
        num = _trim_leading_zeros(num) if len(num) else (0.0,)
        den = _trim_leading_zeros(den) if len(den) else (0.0,)
        if all(c == 0.0 for c in den):
            raise ValueError("denominator polynomial is identically zero")
        # cancel the exact common s^k factor; anything beyond that (root
        # finding, near-cancellation) is deliberately not attempted
        k = min(_trailing_zero_count(num), _trailing_zero_count(den))
        if k and any(c != 0.0 for c in num):
            num = num[:-k]
            den = den[:-k]
        lead = den[0]
        object.__setattr__(self, "num", tuple(c / lead for c in num))
        object.__setattr__(self, "den", tuple(c / lead for c in den))

    def __setattr__(self, name, value):  # immutability
        raise AttributeError("TransferFunction is immutable")

    def __repr__(self) -> str:
        return f"TransferFunction(num={list(self.num)}, den={list(self.den)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return series(self, other)

    def eval_complex(self, s: complex) -> complex:
        """Raw evaluation at a complex point, without pole checking."""
        return complex(np.polyval(self.num, s) / np.polyval(self.den, s))


def make_tf(num: Sequence[float], den: Sequence[float]) -> TransferFunction:
    return TransferFunction(num, den)


def unity_tf() -> TransferFunction:
    return TransferFunction([1.0], [1.0])


@dataclass(frozen=True)
class FrequencyPoint:
    """Single point of a frequency response."""

    f_hz: float
    magnitude: float
    magnitude_db: float
    phase_deg: float


@dataclass(frozen=True)
class LoopMargins:
    """Gain-crossover summary of an open-loop gain.

    phase_margin_deg is 180 plus the principal-value phase (atan2, in
    (-180, 180]) at the crossover, which places it in (0, 360].  Loops whose
    crossover phase has wrapped past -180 report margins above 180 rather
    than negative ones; gain_margin_db is +inf when the unwrapped phase
    never reaches -180 in the searched band.
    """

    crossover_hz: float
    phase_margin_deg: float
    gain_margin_db: float
    multiple_crossovers: bool = False


def eval_freq(tf: TransferFunction, f_hz: float) -> FrequencyPoint:
    """Evaluate tf at s = j*2*pi*f and report magnitude/phase."""
    if f_hz <= 0.0:
        raise ValueError("frequency must be positive")
    s = 1j * TWO_PI * f_hz
    den_val = complex(np.polyval(tf.den, s))
    if den_val == 0.0:
        raise PoleEvaluationError(f_hz)
    val = complex(np.polyval(tf.num, s)) / den_val
    mag = abs(val)
    phase = math.degrees(math.atan2(val.imag, val.real))
    mag_db = 20.0 * math.log10(mag) if mag > 0.0 else -math.inf
    return FrequencyPoint(f_hz=f_hz, magnitude=mag, magnitude_db=mag_db, phase_deg=phase)


def series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    """Cascade a*b as a polynomial product, normalized."""
    return TransferFunction(np.polymul(a.num, b.num), np.polymul(a.den, b.den))


def close_unity_feedback(t: TransferFunction) -> TransferFunction:
    """Closed loop t/(1+t) for unity negative feedback."""
    den = np.polyadd(t.den, t.num)
    if not np.any(den):
        raise ValueError("1 + t is identically zero; feedback loop is degenerate")
    return TransferFunction(t.num, den)


def bode_sweep(
    tf: TransferFunction,
    f_lo: float,
    f_hi: float,
    points_per_decade: int = 200,
) -> list[FrequencyPoint]:
    """Log-spaced sweep with phase unwrapped continuously, seeded at f_lo."""
    if not (0.0 < f_lo < f_hi):
        raise ValueError("need 0 < f_lo < f_hi")
    n = max(2, int(round(points_per_decade * math.log10(f_hi / f_lo))) + 1)
    freqs = np.logspace(math.log10(f_lo), math.log10(f_hi), n)
    s = 1j * TWO_PI * freqs
    den_vals = np.polyval(tf.den, s)
    if np.any(den_vals == 0.0):
        bad = freqs[np.nonzero(den_vals == 0.0)[0][0]]
        raise PoleEvaluationError(float(bad))
    vals = np.polyval(tf.num, s) / den_vals
    mags = np.abs(vals)
    phases = np.degrees(np.unwrap(np.angle(vals)))
    out = []
    for f, m, p in zip(freqs, mags, phases):
        mdb = 20.0 * math.log10(m) if m > 0.0 else -math.inf
        out.append(FrequencyPoint(f_hz=float(f), magnitude=float(m), magnitude_db=mdb, phase_deg=float(p)))
    return out


def write_bode_csv(points: Iterable[FrequencyPoint], path) -> None:
    """CSV export: header ``f_hz,mag_db,phase_deg``, frequencies ascending."""
    rows = sorted(points, key=lambda p: p.f_hz)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "mag_db", "phase_deg"])
        for p in rows:
            w.writerow([repr(p.f_hz), repr(p.magnitude_db), repr(p.phase_deg)])


def _mag(tf: TransferFunction, f: float) -> float:
    s = 1j * TWO_PI * f
    d = complex(np.polyval(tf.den, s))
    if d == 0.0:
        raise PoleEvaluationError(f)
    return abs(complex(np.polyval(tf.num, s)) / d)


def margins(
    tf: TransferFunction,
    f_lo: float,
    f_hi: float,
    points_per_decade: int = 200,
) -> LoopMargins:
    """Gain crossover (|T| = 1) and margins over [f_lo, f_hi].

    The crossover is located on a logarithmic grid and refined by bisection
    to 1e-6 relative tolerance.  With several crossings the lowest one is
    returned and multiple_crossovers is set.
    """
    if not (0.0 < f_lo < f_hi):
        raise ValueError("need 0 < f_lo < f_hi")
    sweep = bode_sweep(tf, f_lo, f_hi, points_per_decade)
    logmag = np.array([math.log10(p.magnitude) if p.magnitude > 0 else -math.inf for p in sweep])
    freqs = np.array([p.f_hz for p in sweep])

    crossings = []
    for i in range(len(freqs)):
        if logmag[i] == 0.0:
            prev_diff = i > 0 and logmag[i - 1] != 0.0
            next_diff = i + 1 < len(freqs) and logmag[i + 1] != 0.0
            if prev_diff or next_diff:
                crossings.append((freqs[i], freqs[i]))
        elif i + 1 < len(freqs) and logmag[i] * logmag[i + 1] < 0.0:
            crossings.append((freqs[i], freqs[i + 1]))
    if not crossings:
        raise NoCrossoverError(
            f"|T| does not cross unity in [{f_lo:g}, {f_hi:g}] Hz "
            f"(|T| spans {10 ** logmag.min():.3g}..{10 ** logmag.max():.3g})"
        )

    lo, hi = crossings[0]
    if lo == hi:
        fc = lo
    else:
        g_lo = math.log10(_mag(tf, lo))
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            g_mid = math.log10(_mag(tf, mid))
            if g_mid == 0.0:
                lo = hi = mid
                break
            if g_lo * g_mid < 0.0:
                hi = mid
            else:
                lo, g_lo = mid, g_mid
            if (hi - lo) / lo < 1e-6:
                break
        fc = math.sqrt(lo * hi)

    at_fc = eval_freq(tf, fc)
    pm = 180.0 + at_fc.phase_deg

    # Gain margin from the first unwrapped -180 deg (mod 360) phase crossing.
    gm_db = math.inf
    phases = np.array([p.phase_deg for p in sweep])
    mags_db = np.array([p.magnitude_db for p in sweep])
    target = -180.0
    diff = phases - target
    for i in range(len(freqs) - 1):
        if diff[i] == 0.0 or diff[i] * diff[i + 1] < 0.0:
            # linear interpolation in log-f for the phase crossing
            if diff[i] == 0.0:
                gm_db = -mags_db[i]
            else:
                w = abs(diff[i]) / (abs(diff[i]) + abs(diff[i + 1]))
                gm_db = -(mags_db[i] * (1 - w) + mags_db[i + 1] * w)
            break

    return LoopMargins(
        crossover_hz=float(fc),
        phase_margin_deg=float(pm),
        gain_margin_db=float(gm_db),
        multiple_crossovers=len(crossings) > 1,
    )
