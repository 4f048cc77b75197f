"""Canonical storage and interpolation of symmetric kernel samples.

A kernel value is stored once per symmetry class: argument tuples are
canonicalized under permutation (sort) and global sign flip (conjugate)
before keying, so permutation queries return the identical stored complex
number and sign-flipped queries return its exact conjugate.

For synthesis the sparse canonical samples are frozen into a dense tensor
over the signed sweep lattice.  Probing never co-sweeps some coordinate
combinations (for example two different points of the same source comb),
which leaves structured holes; freezing fills them by per-axis line
interpolation, in magnitude and unwrapped phase, and records which entries
are measured versus filled.  Off-lattice queries then interpolate
multilinearly in (magnitude, unwrapped phase), hold the band-edge sample
for half a lattice step, and return zero beyond that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from volkit.mixing import canonicalize_frequency_args


class OffLatticeError(ValueError):
    """An inserted argument does not sit on the grid's sweep lattice."""

    def __init__(self, axis: int, freq_hz: float, message: str):
        super().__init__(message)
        self.axis = axis
        self.freq_hz = freq_hz


class EmptyGridError(RuntimeError):
    """Interpolation requested from a grid with no samples."""


@dataclass
class KernelGrid:
    """Accumulating store of order-n kernel samples on a frequency lattice.

    ``lattice_units`` are the positive sweep frequencies in integer
    multiples of ``df_hz`` (coordinates are exact integers internally).
    Re-inserted canonical points average with the incumbent value.
    """

    order: int
    lattice_units: tuple[int, ...]
    df_hz: float
    _sums: dict = field(default_factory=dict)
    _counts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.lattice_units = tuple(sorted(set(int(u) for u in self.lattice_units)))
        if any(u <= 0 for u in self.lattice_units):
            raise ValueError("lattice frequencies must be positive")
        self._lattice_set = set(self.lattice_units)

    # -- coordinate handling -------------------------------------------------

    def _to_units(self, args_hz) -> tuple[int, ...]:
        if len(args_hz) != self.order:
            raise ValueError(
                f"expected {self.order} arguments, got {len(args_hz)}")
        units = []
        for axis, f in enumerate(args_hz):
            u = f / self.df_hz
            if abs(u - round(u)) > 1e-6:
                raise OffLatticeError(
                    axis, f, f"axis {axis}: {f} Hz is not on the df grid")
            u = int(round(u))
            if abs(u) not in self._lattice_set:
                raise OffLatticeError(
                    axis, f, f"axis {axis}: {f} Hz not on the sweep lattice")
            units.append(u)
        return tuple(units)

    def insert(self, args_hz, value: complex) -> None:
        units = self._to_units(args_hz)
        key, conj = canonicalize_frequency_args(units)
        v = np.conj(value) if conj else complex(value)
        if key in self._sums:
            self._sums[key] += v
            self._counts[key] += 1
        else:
            self._sums[key] = complex(v)
            self._counts[key] = 1

    def query_exact(self, args_hz) -> complex | None:
        units = self._to_units(args_hz)
        key, conj = canonicalize_frequency_args(units)
        if key not in self._sums:
            return None
        v = self._sums[key] / self._counts[key]
        return complex(np.conj(v)) if conj else complex(v)

    @property
    def n_points(self) -> int:
        return len(self._sums)

    def items(self):
        """Yield (canonical args in Hz, averaged value)."""
        for key in sorted(self._sums):
            v = self._sums[key] / self._counts[key]
            yield tuple(u * self.df_hz for u in key), complex(v)

    def freeze(self) -> "FrozenKernelGrid":
        if not self._sums:
            raise EmptyGridError(f"order-{self.order} grid has no samples")
        return FrozenKernelGrid._build(self)


def _lexically_canonical_rows(
    args: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized canonical form per row.

    Returns (canonical rows, conjugate flags, self-conjugate flags); a row
    is self-conjugate when its argument multiset equals its own negation,
    which forces the kernel value there to be real.
    """
    fwd = -np.sort(-args, axis=1)          # descending
    rev = -np.sort(args, axis=1)           # descending sort of negation
    pick_rev = np.zeros(len(args), dtype=bool)
    undecided = np.ones(len(args), dtype=bool)
    for j in range(args.shape[1]):
        gt = undecided & (rev[:, j] > fwd[:, j])
        lt = undecided & (rev[:, j] < fwd[:, j])
        pick_rev |= gt
        undecided &= ~(gt | lt)
    out = np.where(pick_rev[:, None], rev, fwd)
    return out, pick_rev, undecided


class FrozenKernelGrid:
    """Dense symmetric tensor over the signed lattice, plus interpolation."""

    def __init__(self, order, df_hz, axis_hz, values, known_mask, filled_mask):
        self.order = order
        self.df_hz = df_hz
        self.axis_hz = axis_hz
        self.values = values
        self.known_mask = known_mask
        self.filled_mask = filled_mask
        self.mag = np.abs(values)
        ph = np.angle(values)
        for ax in range(order):
            ph = np.unwrap(ph, axis=ax)
        self.phase = ph
        step = axis_hz[-1] - axis_hz[-2] if len(axis_hz) > 1 else df_hz
        self.band_edge_hz = axis_hz[-1]
        self.margin_hz = 0.5 * step

    # -- construction ---------------------------------------------------------

    @classmethod
    def _build(cls, grid: KernelGrid) -> "FrozenKernelGrid":
        pos = np.asarray(grid.lattice_units, dtype=np.int64)
        signed = np.concatenate([-pos[::-1], pos])
        index_of = {int(u): i for i, u in enumerate(signed)}
        n, size = grid.order, len(signed)
        vals = np.full((size,) * n, np.nan + 0j, dtype=complex)
        for key, s in grid._sums.items():
            coord = tuple(index_of[u] for u in key)
            vals[coord] = s / grid._counts[key]
        vals = cls._symmetrize(vals, n)
        known = ~np.isnan(vals)
        vals = cls._fill_holes(vals, signed.astype(float) * grid.df_hz, n)
        still = np.isnan(vals)
        if still.any():
            raise EmptyGridError(
                f"order-{n} grid could not be completed: {still.sum()} holes "
                "remain (lattice coverage too sparse)")
        return cls(
            order=n,
            df_hz=grid.df_hz,
            axis_hz=signed.astype(float) * grid.df_hz,
            values=vals,
            known_mask=known,
            filled_mask=~known,
        )

    @staticmethod
    def _symmetrize(vals: np.ndarray, n: int) -> np.ndarray:
        """Propagate samples to all permutation/conjugation images."""
        flip = (slice(None, None, -1),) * n
        for _ in range(2):
            for perm in itertools.permutations(range(n)):
                if perm == tuple(range(n)):
                    continue
                cand = vals.transpose(perm)
                vals = np.where(np.isnan(vals), cand, vals)
            cand = np.conj(vals[flip])
            vals = np.where(np.isnan(vals), cand, vals)
        return vals

    @staticmethod
    def _fill_holes(vals: np.ndarray, axis_hz: np.ndarray, n: int) -> np.ndarray:
        """Iterative per-axis line interpolation of missing entries.

        Works in magnitude and per-line unwrapped phase so filled values
        respect the same smoothness assumptions as off-lattice queries.
        Only positions bracketed by known samples on their line are filled;
        a band-edge hole waits for an axis that brackets it rather than
        being flat-extrapolated while an interpolating axis exists.
        Anything still missing after convergence (possible only for very
        sparse coverage) falls back to extrapolating fills.
        """

        def sweep(vals: np.ndarray, allow_extrapolation: bool) -> np.ndarray:
            for _ in range(2 * n + 1):
                missing_total = np.isnan(vals).sum()
                if missing_total == 0:
                    break
                for ax in range(n):
                    moved = np.moveaxis(vals, ax, -1).copy()
                    flat = moved.reshape(-1, moved.shape[-1])
                    miss = np.isnan(flat)
                    rows = np.nonzero(
                        miss.any(axis=1) & ((~miss).sum(axis=1) >= 2))[0]
                    for r in rows:
                        line = flat[r]
                        got = ~np.isnan(line)
                        xk = axis_hz[got]
                        target = ~got
                        if not allow_extrapolation:
                            target &= (axis_hz >= xk[0]) & (axis_hz <= xk[-1])
                            if not target.any():
                                continue
                        mag_k = np.abs(line[got])
                        ph_k = np.unwrap(np.angle(line[got]))
                        xm = axis_hz[target]
                        line[target] = (np.interp(xm, xk, mag_k)
                                        * np.exp(1j * np.interp(xm, xk, ph_k)))
                    vals = np.moveaxis(moved, -1, ax)
                if np.isnan(vals).sum() == missing_total:
                    break
            return vals

        vals = sweep(vals, allow_extrapolation=False)
        if np.isnan(vals).any():
            vals = sweep(vals, allow_extrapolation=True)
        return vals

    # -- queries ----------------------------------------------------------------

    def query(self, args_hz) -> np.ndarray | complex:
        """Interpolated kernel values at arbitrary signed-frequency tuples.

        Accepts one tuple or an (Q, order) array.  Queries are canonicalized
        first, so permuted and sign-flipped queries are exactly consistent.
        """
        arr = np.atleast_2d(np.asarray(args_hz, dtype=float))
        scalar = np.ndim(args_hz) == 1
        if arr.shape[1] != self.order:
            raise ValueError(f"queries must have {self.order} columns")
        canon, conj, self_conj = _lexically_canonical_rows(arr)

        out = np.zeros(len(canon), dtype=complex)
        inside = np.ones(len(canon), dtype=bool)
        for j in range(self.order):
            inside &= np.abs(canon[:, j]) <= self.band_edge_hz + self.margin_hz
        if inside.any():
            pts = np.clip(canon[inside], self.axis_hz[0], self.axis_hz[-1])
            cell = np.clip(
                np.searchsorted(self.axis_hz, pts, side="right") - 1,
                0, len(self.axis_hz) - 2)
            x0 = self.axis_hz[cell]
            x1 = self.axis_hz[cell + 1]
            w = (pts - x0) / (x1 - x0)
            mag_acc = np.zeros(len(pts))
            ph_acc = np.zeros(len(pts))
            for corner in itertools.product((0, 1), repeat=self.order):
                weight = np.ones(len(pts))
                idx = []
                for j, c in enumerate(corner):
                    weight = weight * (w[:, j] if c else (1.0 - w[:, j]))
                    idx.append(cell[:, j] + c)
                mag_acc += weight * self.mag[tuple(idx)]
                ph_acc += weight * self.phase[tuple(idx)]
            vals = mag_acc * np.exp(1j * ph_acc)
            # exact lattice hits return the stored complex value bit-for-bit
            on_node = np.all((w == 0.0) | (w == 1.0), axis=1)
            if on_node.any():
                node_idx = tuple(
                    (cell + (w == 1.0).astype(np.int64))[on_node, j]
                    for j in range(self.order))
                vals[on_node] = self.values[node_idx]
            out[inside] = vals
        out = np.where(conj, np.conj(out), out)
        # a self-conjugate argument multiset forces a real kernel value;
        # project interpolation roundoff back onto that constraint
        out = np.where(self_conj, out.real + 0.0j, out)
        return complex(out[0]) if scalar else out

    @property
    def fill_fraction(self) -> float:
        return float(self.filled_mask.mean())


@dataclass
class KernelArchive:
    """One grid per kernel order, plus provenance metadata."""

    grids: dict[int, KernelGrid]
    metadata: dict = field(default_factory=dict)
    _frozen: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        orders = sorted(self.grids)
        if orders and orders != list(range(1, orders[-1] + 1)):
            raise ValueError("grid orders must be contiguous from 1")

    @property
    def truncation_order(self) -> int:
        return max(self.grids)

    def grid(self, order: int) -> KernelGrid:
        return self.grids[order]

    def frozen(self, order: int) -> FrozenKernelGrid:
        if order not in self._frozen:
            self._frozen[order] = self.grids[order].freeze()
        return self._frozen[order]

    def query_interpolated(self, order: int, args_hz):
        return self.frozen(order).query(args_hz)
