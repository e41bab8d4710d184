"""Problem instances: channel taps, per-carrier power gains and noise power.

A problem instance is an M x K matrix of nonnegative power gains ``h[m, k]``
(user m, carrier k) together with the receiver noise power ``sigma2``.  Gains
can either be given directly or derived from complex impulse-response taps;
the gain on carrier k is the squared magnitude of the K-point DFT of the tap
vector evaluated at that carrier.

Instance files are JSON documents with fields ``M``, ``K``, ``sigma2`` and
either ``gains`` (M rows of K nonnegative reals) or ``taps`` (per user, a
list of ``[re, im]`` pairs).  Floats are serialized with full round-trip
precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceFormatError

__all__ = [
    "ChannelTaps",
    "ChannelGains",
    "gains_from_taps",
    "generate_random_channel",
    "save_instance",
    "save_taps",
    "load_instance",
    "load_taps",
]


@dataclass(frozen=True)
class ChannelTaps:
    """Complex impulse-response taps for every user, plus system constants.

    ``taps[m]`` is the tap vector of user m (length L_m, 1 <= L_m <= K).
    """

    taps: tuple
    K: int
    sigma2: float

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("carrier count K must be >= 1")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("noise power sigma2 must be positive and finite")
        if len(self.taps) < 1:
            raise ValueError("need at least one user")
        frozen = []
        for m, h in enumerate(self.taps):
            h = np.asarray(h, dtype=np.complex128).reshape(-1)
            if not 1 <= h.size <= self.K:
                raise ValueError(f"user {m + 1}: tap count must be in [1, K]")
            if not np.all(np.isfinite(h.real)) or not np.all(np.isfinite(h.imag)):
                raise ValueError(f"user {m + 1}: taps must be finite")
            h.setflags(write=False)
            frozen.append(h)
        object.__setattr__(self, "taps", tuple(frozen))

    @property
    def M(self) -> int:
        return len(self.taps)

    @property
    def tap_counts(self) -> tuple:
        return tuple(h.size for h in self.taps)


@dataclass(frozen=True)
class ChannelGains:
    """Per-user per-carrier power gains and the noise power.

    ``gains`` has shape (M, K), entries finite and >= 0.  Immutable: the
    stored array is a read-only copy.
    """

    gains: np.ndarray
    sigma2: float

    def __post_init__(self):
        g = np.array(self.gains, dtype=np.float64, copy=True)
        if g.ndim != 2 or g.size == 0:
            raise ValueError("gains must be a nonempty M x K matrix")
        if not np.all(np.isfinite(g)):
            raise ValueError("gains must be finite")
        if np.any(g < 0):
            raise ValueError("gains must be nonnegative")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("noise power sigma2 must be positive and finite")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def M(self) -> int:
        return self.gains.shape[0]

    @property
    def K(self) -> int:
        return self.gains.shape[1]

    def noise_over_gain(self) -> np.ndarray:
        """sigma2 / h as an (M, K) array, +inf where the gain is zero."""
        with np.errstate(divide="ignore"):
            return np.where(self.gains > 0, self.sigma2 / self.gains, np.inf)


def gains_from_taps(taps: ChannelTaps) -> ChannelGains:
    """Evaluate per-carrier power gains from the impulse-response taps.

    Carrier k of user m carries the squared magnitude of
    sum_l taps[m][l] * exp(-2*pi*j*l*k / K) for l = 0..L_m-1, k = 0..K-1.
    """
    freq = np.empty((taps.M, taps.K), dtype=np.complex128)
    for m, h in enumerate(taps.taps):
        freq[m] = np.fft.fft(h, n=taps.K)
    return ChannelGains(gains=np.abs(freq) ** 2, sigma2=taps.sigma2)


def generate_random_channel(M: int, K: int, L: int, seed: int) -> ChannelTaps:
    """Draw a random frequency-selective channel, deterministic per seed.

    Taps are i.i.d. circularly symmetric complex Gaussian with per-tap
    variance 1/L, so the average per-carrier power gain is 1 and SNR values
    in dB are directly interpretable.
    """
    if M < 1 or K < 1 or L < 1:
        raise ValueError("M, K and L must all be >= 1")
    if L > K:
        raise ValueError("tap count L must not exceed carrier count K")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(1.0 / (2.0 * L))
    taps = rng.normal(0.0, scale, size=(M, L)) + 1j * rng.normal(0.0, scale, size=(M, L))
    return ChannelTaps(taps=tuple(taps[m] for m in range(M)), K=K, sigma2=1.0)


def _require(cond, message, field=None):
    if not cond:
        raise InstanceFormatError(message, field=field)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _parse_header(doc):
    _require(isinstance(doc, dict), "instance file must contain a JSON object")
    for name in ("M", "K", "sigma2"):
        _require(name in doc, "missing required field", field=name)
    for name in ("M", "K"):
        value = doc[name]
        _require(
            isinstance(value, int) and not isinstance(value, bool) and value >= 1,
            "must be an integer >= 1",
            field=name,
        )
    sigma2 = doc["sigma2"]
    _require(
        _is_real(sigma2) and np.isfinite(sigma2) and sigma2 > 0,
        "must be a positive finite real",
        field="sigma2",
    )
    return doc["M"], doc["K"], float(sigma2)


def _load_document(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON ({exc.msg})", line=exc.lineno) from exc


def load_instance(path) -> ChannelGains:
    """Load an instance file; a taps-form file is converted to gains."""
    doc = _load_document(path)
    M, K, sigma2 = _parse_header(doc)
    if "gains" in doc:
        rows = doc["gains"]
        _require(isinstance(rows, list) and len(rows) == M, f"expected {M} rows", field="gains")
        gains = np.empty((M, K), dtype=np.float64)
        for m, row in enumerate(rows):
            _require(
                isinstance(row, list) and len(row) == K,
                f"expected {K} entries",
                field=f"gains[{m}]",
            )
            for k, v in enumerate(row):
                _require(
                    _is_real(v) and np.isfinite(v) and v >= 0,
                    "must be a finite real >= 0",
                    field=f"gains[{m}][{k}]",
                )
                gains[m, k] = v
        return ChannelGains(gains=gains, sigma2=sigma2)
    if "taps" in doc:
        return gains_from_taps(_parse_taps(doc, M, K, sigma2))
    raise InstanceFormatError("instance needs a 'gains' or 'taps' field")


def load_taps(path) -> ChannelTaps:
    """Load a taps-form instance file."""
    doc = _load_document(path)
    M, K, sigma2 = _parse_header(doc)
    _require("taps" in doc, "missing required field", field="taps")
    return _parse_taps(doc, M, K, sigma2)


def _parse_taps(doc, M, K, sigma2) -> ChannelTaps:
    users = doc["taps"]
    _require(isinstance(users, list) and len(users) == M, f"expected {M} users", field="taps")
    taps = []
    for m, entries in enumerate(users):
        _require(
            isinstance(entries, list) and 1 <= len(entries) <= K,
            f"tap count must be in [1, {K}]",
            field=f"taps[{m}]",
        )
        h = np.empty(len(entries), dtype=np.complex128)
        for i, pair in enumerate(entries):
            ok = (
                isinstance(pair, list)
                and len(pair) == 2
                and all(_is_real(x) and np.isfinite(x) for x in pair)
            )
            _require(ok, "must be a [re, im] pair of finite reals", field=f"taps[{m}][{i}]")
            h[i] = complex(pair[0], pair[1])
        taps.append(h)
    return ChannelTaps(taps=tuple(taps), K=K, sigma2=sigma2)


def save_instance(gains: ChannelGains, path) -> None:
    """Write a gains-form instance file (full float precision, round-trips)."""
    doc = {
        "M": gains.M,
        "K": gains.K,
        "sigma2": gains.sigma2,
        "gains": [[float(v) for v in row] for row in gains.gains],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def save_taps(taps: ChannelTaps, path) -> None:
    """Write a taps-form instance file."""
    doc = {
        "M": taps.M,
        "K": taps.K,
        "sigma2": taps.sigma2,
        "taps": [[[float(c.real), float(c.imag)] for c in h] for h in taps.taps],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
