"""Stream files and synthetic stream generators.

Text streams hold one decimal item id per line.  Binary streams start with
the 8-byte magic ``DPHHSTR1`` followed by little-endian uint32 item ids.
Item ids are 1-based.
"""

from __future__ import annotations

import io
import math
import sys
from dataclasses import asdict, dataclass

import numpy as np

MAGIC = b"DPHHSTR1"

GENERATOR_KINDS = ("uniform", "zipf", "planted", "all-distinct")


class StreamInputError(ValueError):
    """The stream source is unreadable or malformed."""


def _check_range(arr: np.ndarray, n: int | None, where=None):
    if n is None or arr.size == 0:
        return
    bad = np.flatnonzero((arr < 1) | (arr > n))
    if bad.size:
        i = int(bad[0])
        loc = f" on line {where[i]}" if where is not None else f" at position {i + 1}"
        raise StreamInputError(f"item id {int(arr[i])}{loc} outside [1, {n}]")


def _parse_text(data: bytes, n: int | None) -> np.ndarray:
    values = []
    lines = []
    text = data.decode("ascii", errors="replace")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s.isdigit():
            raise StreamInputError(f"line {lineno}: expected an unsigned integer, got {raw!r}")
        values.append(int(s))
        lines.append(lineno)
    arr = np.array(values, dtype=np.int64)
    _check_range(arr, n, lines)
    return arr


def _parse_binary(data: bytes, n: int | None) -> np.ndarray:
    body = data[len(MAGIC):]
    if len(body) % 4:
        raise StreamInputError(f"binary stream body of {len(body)} bytes is not a multiple of 4")
    arr = np.frombuffer(body, dtype="<u4").astype(np.int64)
    _check_range(arr, n)
    return arr


def parse_bytes(data: bytes, n: int | None = None) -> np.ndarray:
    if data.startswith(MAGIC):
        return _parse_binary(data, n)
    if data[:4] == MAGIC[:4]:
        raise StreamInputError("bad magic: binary streams must start with DPHHSTR1")
    return _parse_text(data, n)


def parse_stream(source, n: int | None = None) -> np.ndarray:
    """Read a stream from a path, ``"-"`` (stdin) or a binary file object."""
    try:
        if source == "-":
            data = sys.stdin.buffer.read()
        elif hasattr(source, "read"):
            data = source.read()
            if isinstance(data, str):
                data = data.encode()
        else:
            with open(source, "rb") as fh:
                data = fh.read()
    except OSError as exc:
        raise StreamInputError(f"cannot read stream {source!r}: {exc}") from exc
    return parse_bytes(data, n)


def write_stream(target, stream, binary: bool = False) -> None:
    arr = np.asarray(stream, dtype=np.int64)
    if arr.size and (arr.min() < 1 or arr.max() > 0xFFFFFFFF):
        raise ValueError("item ids must lie in [1, 2^32 - 1]")
    if binary:
        payload = MAGIC + arr.astype("<u4").tobytes()
    else:
        payload = "".join(f"{int(x)}\n" for x in arr).encode()
    if hasattr(target, "write"):
        target.write(payload)
    else:
        with open(target, "wb") as fh:
            fh.write(payload)


def to_bytes(stream, binary: bool = False) -> bytes:
    buf = io.BytesIO()
    write_stream(buf, stream, binary=binary)
    return buf.getvalue()


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    m: int
    n: int
    seed: int = 0
    s: float = 1.1         # zipf exponent
    item: int = 1          # planted item
    rho: float = 0.1       # planted mass fraction

    def validate(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if self.n < 1:
            raise ValueError("universe size n must be at least 1")
        if self.m < 0:
            raise ValueError("stream length m must be non-negative")
        if self.kind == "zipf" and not self.s > 0:
            raise ValueError("zipf exponent s must be positive")
        if self.kind == "planted":
            if not (0 <= self.rho <= 1):
                raise ValueError(f"planted mass fraction must lie in [0, 1], got {self.rho}")
            if not (1 <= self.item <= self.n):
                raise ValueError(f"planted item {self.item} outside [1, {self.n}]")
        if self.kind == "all-distinct" and self.m > self.n:
            raise ValueError(f"all-distinct needs n >= m, got n={self.n}, m={self.m}")

    @classmethod
    def parse(cls, text: str, m: int, n: int, seed: int = 0) -> "GeneratorSpec":
        """Parse ``kind[:key=value,...]``, e.g. ``planted:item=7,rho=0.05`` or ``zipf:s=1.2``."""
        kind, _, rest = text.partition(":")
        kw = {}
        for part in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, val = part.partition("=")
            if not eq or key not in ("s", "item", "rho"):
                raise ValueError(f"bad generator option {part!r} in {text!r}")
            kw[key] = int(val) if key == "item" else float(val)
        spec = cls(kind.strip(), int(m), int(n), int(seed), **kw)
        spec.validate()
        return spec

    def as_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def uniform_stream(m: int, n: int, seed: int = 0) -> np.ndarray:
    return _rng(seed).integers(1, n + 1, size=m, dtype=np.int64)


def zipf_stream(m: int, n: int, s: float, seed: int = 0) -> np.ndarray:
    """Item k in [1, n] with probability proportional to k^-s."""
    w = np.arange(1, n + 1, dtype=np.float64) ** -s
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    u = _rng(seed).random(m)
    return np.searchsorted(cdf, u, side="right").astype(np.int64) + 1


def planted_stream(m: int, n: int, item: int, rho: float, seed: int = 0) -> np.ndarray:
    """ceil(rho*m) copies of `item` at random positions, the rest uniform on [1, n]."""
    if not (0 <= rho <= 1):
        raise ValueError(f"planted mass fraction must lie in [0, 1], got {rho}")
    rng = _rng(seed)
    k = min(m, math.ceil(rho * m))
    out = rng.integers(1, n + 1, size=m, dtype=np.int64)
    out[rng.choice(m, size=k, replace=False)] = item
    return out


def all_distinct_stream(m: int, n: int, seed: int = 0) -> np.ndarray:
    if m > n:
        raise ValueError(f"all-distinct needs n >= m, got n={n}, m={m}")
    return _rng(seed).permutation(n)[:m].astype(np.int64) + 1


def generate_stream(spec: GeneratorSpec) -> np.ndarray:
    spec.validate()
    if spec.kind == "uniform":
        return uniform_stream(spec.m, spec.n, spec.seed)
    if spec.kind == "zipf":
        return zipf_stream(spec.m, spec.n, spec.s, spec.seed)
    if spec.kind == "planted":
        return planted_stream(spec.m, spec.n, spec.item, spec.rho, spec.seed)
    return all_distinct_stream(spec.m, spec.n, spec.seed)
