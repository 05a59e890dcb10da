"""Seeded synthetic flow data with known traffic profiles and class imbalance.

Each profile is a well-separated group in feature space with its own
normal/attack geometry, chosen so that different simple classifiers do best
on different profiles:

* ``local``  - normal flows sit in two tight balls inside diffuse attack traffic
* ``axis``   - an XOR pattern on two features, the rest irrelevant
* ``linear`` - an oblique half-space split across six features

Rows carry Bot-IoT-like columns (addresses, protocol, hex/decimal ports and
numeric counters) so the whole preprocessing path is exercised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .flowdata import RawTable, SchemaConfig

SHAPES = ("local", "axis", "linear")
NUMERIC_COLUMNS = ("pkts", "bytes", "dur", "mean", "stddev", "sum", "rate", "srate")
COLUMNS = ("pkSeqID", "proto", "saddr", "sport", "daddr", "dport", "seq",
           *NUMERIC_COLUMNS, "attack")
PAPER_NORMAL_FRACTION = 0.00013

SYNTH_SCHEMA = SchemaConfig(
    label_column="attack",
    positive_label_values=frozenset({"1"}),
    drop_columns=("pkSeqID", "seq"),
    categorical_columns=("proto", "saddr", "daddr"),
    port_columns=("sport", "dport"),
)

_PROTOS = ("arp", "icmp", "tcp", "udp")
_N_LATENT = len(NUMERIC_COLUMNS)


@dataclass(frozen=True)
class SynthConfig:
    n_rows: int = 50_000
    normal_fraction: float = 0.005
    n_profiles: int = 3
    profile_weights: tuple[float, ...] = (1 / 3, 1 / 3, 1 / 3)
    profile_shapes: tuple[str, ...] = SHAPES
    # per-profile offsets and scales of the numeric columns, (n_profiles, 8)
    means: np.ndarray = field(default=None, repr=False)
    spreads: np.ndarray = field(default=None, repr=False)
    label_noise: float = 0.0
    hex_port_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        p = self.n_profiles
        if p < 1:
            raise DataError("n_profiles must be >= 1")
        if len(self.profile_weights) != p or len(self.profile_shapes) != p:
            raise DataError("profile_weights and profile_shapes need one entry per profile")
        if not math.isclose(sum(self.profile_weights), 1.0, abs_tol=1e-9):
            raise DataError("profile weights must sum to 1")
        if any(w <= 0 for w in self.profile_weights):
            raise DataError("profile weights must be positive")
        if any(s not in SHAPES for s in self.profile_shapes):
            raise DataError(f"profile shapes must be drawn from {SHAPES}")
        if not 0.0 < self.normal_fraction < 1.0:
            raise DataError("normal_fraction must lie in (0, 1)")
        if not 0.0 <= self.label_noise < 0.5:
            raise DataError("label_noise must lie in [0, 0.5)")
        means = _default_means(p) if self.means is None else np.asarray(self.means, dtype=float)
        spreads = (np.ones((p, _N_LATENT)) if self.spreads is None
                   else np.asarray(self.spreads, dtype=float))
        if means.shape != (p, _N_LATENT) or spreads.shape != (p, _N_LATENT):
            raise DataError(f"means and spreads must be ({p}, {_N_LATENT}) matrices")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "spreads", spreads)

    @property
    def n_normal(self) -> int:
        return int(math.floor(self.normal_fraction * self.n_rows + 0.5))


def _default_means(p: int) -> np.ndarray:
    # profile i is shifted by 12 along its own block of four counters
    means = np.tile(np.array([20.0, 500.0, 5.0, 1.0, 0.5, 40.0, 10.0, 8.0]), (p, 1))
    for i in range(p):
        block = [(4 * (i - 1) + j) % _N_LATENT for j in range(4)] if i else []
        means[i, block] += 12.0
    return means


def preset(name: str, n_rows: int = 50_000, normal_fraction: float = 0.005,
           seed: int = 0) -> SynthConfig:
    """Named configurations. ``hetero3``: three profiles, one per shape."""
    if name == "hetero3":
        return SynthConfig(n_rows=n_rows, normal_fraction=normal_fraction, seed=seed)
    if name == "homogeneous":
        return SynthConfig(n_rows=n_rows, normal_fraction=normal_fraction, n_profiles=1,
                           profile_weights=(1.0,), profile_shapes=("linear",), seed=seed)
    raise DataError(f"unknown preset {name!r}; available: hetero3, homogeneous")


def _allocate(total: int, weights) -> np.ndarray:
    """Largest-remainder split of ``total`` into integer parts."""
    w = np.asarray(weights, dtype=float)
    raw = total * w / w.sum()
    counts = np.floor(raw).astype(np.int64)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: total - counts.sum()]] += 1
    return counts


def _sign(rng, n):
    return np.where(rng.random(n) < 0.5, -1.0, 1.0)


def _latent(shape: str, label: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale latent points of one class for one profile shape."""
    d = _N_LATENT
    if shape == "local":
        direction = np.ones(d) / math.sqrt(d)
        centers = np.array([2.5 * direction, -2.5 * direction])
        out = np.empty((0, d))
        while out.shape[0] < n:
            m = 2 * (n - out.shape[0]) + 16
            if label == 0:
                pts = centers[rng.integers(0, 2, m)] + 0.3 * rng.standard_normal((m, d))
                keep = np.min(np.linalg.norm(pts[:, None] - centers, axis=2), axis=1) < 1.2
            else:
                pts = 1.3 * rng.standard_normal((m, d))
                keep = np.min(np.linalg.norm(pts[:, None] - centers, axis=2), axis=1) > 1.8
            out = np.vstack([out, pts[keep]])
        return out[:n]
    z = rng.standard_normal((n, d))
    if shape == "axis":
        gap = 0.35
        a = np.abs(z[:, 0]) + gap
        b = np.abs(z[:, 1]) + gap
        s = _sign(rng, n)
        z[:, 0] = s * a
        # normal traffic where the two signs disagree
        z[:, 1] = (-s if label == 0 else s) * b
        z[:, 2:] *= 0.25
        return z
    # linear: oblique half-space over the first six counters
    w = np.zeros(d)
    w[:6] = 1.0 / math.sqrt(6.0)
    proj = z @ w
    z -= np.outer(proj, w)
    side = np.abs(rng.standard_normal(n)) + 0.3
    z += np.outer(side if label == 0 else -side, w)
    z[:, 6:] *= 0.25
    return z


@dataclass(frozen=True)
class SynthResult:
    table: RawTable
    profiles: np.ndarray
    labels: np.ndarray


def generate(config: SynthConfig) -> SynthResult:
    """Build the table. Exactly ``config.n_normal`` rows are labelled normal."""
    n = config.n_rows
    n_normal = config.n_normal
    if n_normal < 2:
        raise DataError(f"config yields {n_normal} normal rows; at least 2 are required")
    if n - n_normal < 2:
        raise DataError("config yields fewer than 2 attack rows")
    rng = np.random.default_rng(config.seed)
    per_profile = _allocate(n, config.profile_weights)
    normals = _allocate(n_normal, per_profile)
    if np.any(normals > per_profile):
        raise DataError("a profile cannot hold its share of normal rows")

    latent, profile, label = [], [], []
    for p, shape in enumerate(config.profile_shapes):
        for cls, count in ((0, int(normals[p])), (1, int(per_profile[p] - normals[p]))):
            if count == 0:
                continue
            z = _latent(shape, cls, count, rng)
            if config.label_noise > 0:
                # swap in the other class's geometry; keeps class counts exact
                flip = rng.random(count) < config.label_noise
                if flip.any():
                    z[flip] = _latent(shape, 1 - cls, int(flip.sum()), rng)
            latent.append(z)
            profile.append(np.full(count, p))
            label.append(np.full(count, cls))
    Z = np.vstack(latent)
    profiles = np.concatenate(profile)
    labels = np.concatenate(label)
    order = rng.permutation(n)
    Z, profiles, labels = Z[order], profiles[order], labels[order]

    numeric = config.means[profiles] + config.spreads[profiles] * Z
    rows = _render_rows(numeric, profiles, labels, config, rng)
    return SynthResult(RawTable(COLUMNS, rows), profiles, labels)


def _render_rows(numeric, profiles, labels, config, rng) -> list[tuple[str, ...]]:
    n = numeric.shape[0]
    n_prof = config.n_profiles
    # each profile favours one protocol and talks to a handful of hosts/ports
    main_proto = np.arange(n_prof) % len(_PROTOS)
    proto_idx = np.where(rng.random(n) < 0.9, main_proto[profiles],
                         rng.integers(0, len(_PROTOS), n))
    src_host = rng.integers(1, 4, n)
    dst_host = rng.integers(1, 4, n)
    sport = 40000 + 1000 * profiles + rng.integers(0, 3, n)
    dport_choices = np.array([80, 53, 1883, 443, 8080, 123])
    dport = dport_choices[profiles % dport_choices.size]
    hex_s = rng.random(n) < config.hex_port_fraction
    hex_d = rng.random(n) < config.hex_port_fraction
    seq = rng.integers(1, 1 << 20, n)
    rows = []
    for i in range(n):
        p = int(profiles[i])
        sp = int(sport[i])
        dp = int(dport[i])
        rows.append((
            str(i + 1),
            _PROTOS[proto_idx[i]],
            f"192.168.{p}.{src_host[i]}",
            f"0x{sp:04x}" if hex_s[i] else str(sp),
            f"10.0.{p}.{dst_host[i]}",
            f"0x{dp:04x}" if hex_d[i] else str(dp),
            str(int(seq[i])),
            *(f"{v:.6f}" for v in numeric[i]),
            str(int(labels[i])),
        ))
    return rows


def write_synth(config: SynthConfig, out: str | Path, schema_out: str | Path | None = None) -> SynthResult:
    """Write the CSV plus the ``<csv>.profiles`` truth sidecar (row, profile)."""
    result = generate(config)
    out = Path(out)
    result.table.write_csv(out)
    with open(f"{out}.profiles", "w", encoding="utf-8") as fh:
        fh.write("row,profile\n")
        fh.writelines(f"{i},{p}\n" for i, p in enumerate(result.profiles))
    if schema_out is not None:
        Path(schema_out).write_text(SYNTH_SCHEMA.to_text(), encoding="utf-8")
    return result
