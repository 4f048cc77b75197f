"""File formats: versioned JSON for plans, datasets, archives, and reports.

Datasets use one block per large-signal operating point with phasors keyed
by the index vector string and stored as [re, im] pairs, so externally
measured multi-tone spectra can be hand-written or exported into the same
schema and fed to the extractor.  Bulk archive data rides as base64
little-endian float64.  Every file embeds the format version and a config
hash; readers reject unknown major versions.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from dataclasses import asdict

import numpy as np

from volkit.kernels import KernelArchive, KernelGrid
from volkit.probing import CaptureInfo, SpectralDataset, Waveform
from volkit.sweeps import SweepPlan

FORMAT_VERSION = "1.0"


class FormatError(ValueError):
    """File is not a readable volkit artifact."""


def config_hash(obj) -> str:
    """Stable sha256 over the canonical JSON form of a config mapping."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _envelope(kind: str, payload: dict, cfg_hash: str | None) -> dict:
    return {
        "format": f"volkit/{kind}",
        "version": FORMAT_VERSION,
        "config_hash": cfg_hash or config_hash(payload),
        **payload,
    }


def _check_envelope(doc: dict, kind: str) -> None:
    name = doc.get("format")
    if name != f"volkit/{kind}":
        raise FormatError(f"expected volkit/{kind}, found {name!r}")
    version = str(doc.get("version", ""))
    major = version.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise FormatError(f"unsupported major version {version!r}")


def write_json(path: str, doc: dict) -> None:
    """Atomic write with stable key order and a trailing newline."""
    blob = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def encode_f64(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode()


def decode_f64(blob: str, shape=None) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(blob), dtype="<f8")
    return arr.reshape(shape) if shape is not None else arr


def encode_i64(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<i8").tobytes()).decode()


def decode_i64(blob: str, shape=None) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(blob), dtype="<i8")
    return arr.reshape(shape) if shape is not None else arr


def encode_complex(arr: np.ndarray) -> str:
    flat = np.asarray(arr, dtype=complex).reshape(-1)
    inter = np.empty(2 * len(flat))
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return encode_f64(inter)


def decode_complex(blob: str, shape) -> np.ndarray:
    inter = decode_f64(blob)
    return (inter[0::2] + 1j * inter[1::2]).reshape(shape)


# ---------------------------------------------------------------------------
# plans


def plan_to_dict(plan: SweepPlan) -> dict:
    return {
        "plan_id": plan.plan_id,
        "df_hz": plan.df_hz,
        "max_mixing_order": plan.max_mixing_order,
        "coverage": plan.coverage,
        "axes_hz": [list(a) for a in plan.axes_hz],
        "V": [list(row) for row in plan.schedule],
    }


def plan_from_dict(d: dict) -> SweepPlan:
    return SweepPlan(
        axes_hz=tuple(tuple(a) for a in d["axes_hz"]),
        df_hz=float(d["df_hz"]),
        max_mixing_order=int(d["max_mixing_order"]),
        schedule=tuple(tuple(row) for row in d["V"]),
        coverage=d["coverage"],
        plan_id=d["plan_id"],
    )


def save_plan(path: str, plan: SweepPlan, cfg_hash: str | None = None) -> None:
    write_json(path, _envelope("plan", plan_to_dict(plan), cfg_hash))


def load_plan(path: str) -> SweepPlan:
    doc = read_json(path)
    _check_envelope(doc, "plan")
    return plan_from_dict(doc)


# ---------------------------------------------------------------------------
# datasets


def _index_key(k) -> str:
    return "[" + ",".join(str(int(v)) for v in k) + "]"


def dataset_to_dict(ds: SpectralDataset) -> dict:
    blocks = []
    trips = ds.plan.triplets()
    for t in range(ds.phasors.shape[0]):
        for a in range(ds.phasors.shape[1]):
            entry = {
                "triplet_id": t,
                "amp_id": a,
                "freqs_hz": list(trips[t]),
                "V": list(ds.plan.schedule[a]),
                "B": {
                    _index_key(k): [ds.phasors[t, a, i].real,
                                    ds.phasors[t, a, i].imag]
                    for i, k in enumerate(ds.indices)
                    if np.isfinite(ds.phasors[t, a, i])
                },
            }
            blocks.append(entry)
    return {
        "plan": plan_to_dict(ds.plan),
        "k": [list(k) for k in ds.indices],
        "source": ds.source,
        "capture": asdict(ds.capture) if ds.capture else None,
        "lsop_blocks": blocks,
    }


def dataset_from_dict(d: dict) -> SpectralDataset:
    plan = plan_from_dict(d["plan"])
    indices = tuple(tuple(int(v) for v in k) for k in d["k"])
    pos = {_index_key(k): i for i, k in enumerate(indices)}
    phasors = np.full(
        (plan.n_triplets, len(plan.schedule), len(indices)),
        np.nan + 1j * np.nan, dtype=complex)
    for block in d["lsop_blocks"]:
        t, a = int(block["triplet_id"]), int(block["amp_id"])
        for key, (re, im) in block["B"].items():
            phasors[t, a, pos[key]] = complex(re, im)
    capture = CaptureInfo(**d["capture"]) if d.get("capture") else None
    return SpectralDataset(plan=plan, indices=indices, phasors=phasors,
                           capture=capture, source=d.get("source", "file"))


def save_dataset(path: str, ds: SpectralDataset,
                 cfg_hash: str | None = None) -> None:
    write_json(path, _envelope("dataset", dataset_to_dict(ds), cfg_hash))


def load_dataset(path: str) -> SpectralDataset:
    doc = read_json(path)
    _check_envelope(doc, "dataset")
    return dataset_from_dict(doc)


# ---------------------------------------------------------------------------
# kernel archives


def archive_to_dict(archive: KernelArchive) -> dict:
    grids = {}
    for order, grid in archive.grids.items():
        keys = sorted(grid._sums)
        coords = np.array(keys, dtype=np.int64).reshape(len(keys), order)
        sums = np.array([grid._sums[k] for k in keys], dtype=complex)
        counts = np.array([grid._counts[k] for k in keys], dtype=np.int64)
        grids[str(order)] = {
            "lattice_units": list(grid.lattice_units),
            "n_points": len(keys),
            "coords_b64": encode_i64(coords),
            "sums_b64": encode_complex(sums),
            "counts_b64": encode_i64(counts),
        }
    return {
        "metadata": dict(archive.metadata),
        "df_hz": next(iter(archive.grids.values())).df_hz,
        "grids": grids,
    }


def archive_from_dict(d: dict) -> KernelArchive:
    df = float(d["df_hz"])
    grids = {}
    for order_s, g in d["grids"].items():
        order = int(order_s)
        grid = KernelGrid(order=order,
                          lattice_units=tuple(g["lattice_units"]),
                          df_hz=df)
        n = int(g["n_points"])
        coords = decode_i64(g["coords_b64"], (n, order))
        sums = decode_complex(g["sums_b64"], (n,))
        counts = decode_i64(g["counts_b64"], (n,))
        for i in range(n):
            key = tuple(int(v) for v in coords[i])
            grid._sums[key] = complex(sums[i])
            grid._counts[key] = int(counts[i])
        grids[order] = grid
    return KernelArchive(grids=grids, metadata=d.get("metadata", {}))


def save_archive(path: str, archive: KernelArchive,
                 cfg_hash: str | None = None) -> None:
    write_json(path, _envelope("archive", archive_to_dict(archive), cfg_hash))


def load_archive(path: str) -> KernelArchive:
    doc = read_json(path)
    _check_envelope(doc, "archive")
    return archive_from_dict(doc)


# ---------------------------------------------------------------------------
# waveforms and reports


def save_waveform_csv(path: str, total: Waveform,
                      per_order: dict[int, Waveform] | None = None) -> None:
    per_order = per_order or {}
    orders = sorted(per_order)
    header = ["t"] + [f"y{n}" for n in orders] + ["y_total"]
    lines = [",".join(header)]
    t = total.times()
    for i in range(len(total.samples)):
        row = [f"{t[i]:.17g}"]
        row += [f"{per_order[n].samples[i]:.17g}" for n in orders]
        row.append(f"{total.samples[i]:.17g}")
        lines.append(",".join(row))
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def save_report(path: str, kind: str, payload: dict,
                cfg_hash: str | None = None) -> None:
    write_json(path, _envelope(kind, payload, cfg_hash))
