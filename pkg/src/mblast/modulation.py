"""Constellations, minimum-distance quantization, and binary-alphabet helpers."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Alphabet",
    "BinaryAlphabet",
    "NotInAlphabet",
    "bpsk",
    "bfsk",
    "qam16",
    "alphabet_by_name",
    "quantize",
    "quantize_index",
    "delta_delta",
    "random_symbols",
]


class NotInAlphabet(Exception):
    """A symbol was expected to be a constellation point and is not."""


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Ordered finite set of complex constellation points.

    The order matters: quantization ties are broken toward the lowest index,
    so results are reproducible.  Points are unnormalized; SNR bookkeeping
    consumes `symbol_energy` explicitly.
    """

    points: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if pts.size < 2:
            raise ValueError("alphabet needs at least two points")
        if np.unique(pts).size != pts.size:
            raise ValueError("alphabet points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def symbol_energy(self):
        """Mean of |a|^2 over the points."""
        return float(np.mean(np.abs(self.points) ** 2))


@dataclass(frozen=True, eq=False)
class BinaryAlphabet(Alphabet):
    """Two-point alphabet {a1, a2} with the difference helper delta_a = a1 - a2."""

    def __post_init__(self):
        super().__post_init__()
        if len(self) != 2:
            raise ValueError("binary alphabet needs exactly two points")

    @property
    def a1(self):
        return complex(self.points[0])

    @property
    def a2(self):
        return complex(self.points[1])

    @property
    def delta_a(self):
        return self.a1 - self.a2

    @property
    def kind(self):
        """"bpsk" for {a, -a}, "bfsk" for {a, ja} (a real positive), else "generic"."""
        a1, a2 = self.a1, self.a2
        if a1.imag == 0 and a1.real > 0:
            if a2 == -a1:
                return "bpsk"
            if a2 == 1j * a1:
                return "bfsk"
        return "generic"


def bpsk(a1=1.0):
    """Antipodal binary alphabet {a1, -a1}, a1 real positive."""
    if not a1 > 0:
        raise ValueError("a1 must be positive")
    return BinaryAlphabet(points=np.array([a1, -a1], dtype=complex), label="bpsk")


def bfsk(a1=1.0):
    """Orthogonal binary alphabet {a1, j*a1}, a1 real positive."""
    if not a1 > 0:
        raise ValueError("a1 must be positive")
    return BinaryAlphabet(points=np.array([a1, 1j * a1], dtype=complex), label="bfsk")


def qam16():
    """16-QAM with levels {-3,-1,1,3} on each axis, unnormalized (E_s = 10)."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return Alphabet(points=pts, label="qam16")


_BUILTIN = {"bpsk": bpsk, "bfsk": bfsk, "qam16": qam16}


def alphabet_by_name(name):
    """Construct one of the built-in alphabets from its config/CLI name."""
    try:
        return _BUILTIN[name.lower()]()
    except KeyError:
        raise ValueError(
            f"unknown alphabet {name!r}; choose from {sorted(_BUILTIN)}"
        ) from None


def quantize_index(alphabet, y):
    """Index of the nearest constellation point for each entry of ``y``.

    Ties go to the lowest index (numpy argmin picks the first minimum).
    """
    y = np.asarray(y, dtype=complex)
    d = np.abs(y[..., None] - alphabet.points)
    return np.argmin(d, axis=-1)


def quantize(alphabet, y):
    """Map ``y`` (scalar or array) to the nearest constellation point(s)."""
    idx = quantize_index(alphabet, y)
    out = alphabet.points[idx]
    if np.isscalar(y) or np.asarray(y).ndim == 0:
        return complex(out)
    return out


def delta_delta(binary, s):
    """+1 if ``s`` is the first point of the binary alphabet, -1 if the second."""
    s = complex(s)
    if s == binary.a1:
        return 1
    if s == binary.a2:
        return -1
    raise NotInAlphabet(f"{s!r} is neither {binary.a1!r} nor {binary.a2!r}")


def random_symbols(alphabet, count, rng):
    """Draw ``count`` iid symbols uniformly from the alphabet."""
    if count < 1:
        raise ValueError("count must be >= 1")
    idx = rng.integers(0, len(alphabet), size=count)
    return alphabet.points[idx]
