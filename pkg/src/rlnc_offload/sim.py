"""Road-corridor model: RSU geometry, transmission schedule, channel and Monte Carlo.

``R`` RSUs sit at the centres of consecutive ISD-long service areas along a
straight road, ``x_j = (j - 0.5) * isd``. A vehicle spreads the ``N`` coded
packets of each of ``d`` source messages uniformly over a reset window of
``C`` service areas, cycling S_1..S_d, then starts a new batch in the next
window. A single stationary eavesdropper listens at ``eaves_pos_m``.

All metrics refer to the *exposed* epoch, the reset window that contains the
eavesdropper: batches sent elsewhere are never overheard.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .gf import DEFAULT_POLY, FieldSpec, batch_rank, batch_rank_packed
from .rlnc import DecoderState, SourceMessage, encode_packet

Z95 = 1.959963984540054
BLOCK_TRIALS = 1000
THREADS_ENV = "RLNC_OFFLOAD_THREADS"


@dataclass(frozen=True)
class ChannelModel:
    """Packet error probability as a function of link distance.

    ``disk``: ``eps`` within ``radius_m``, 1 beyond. ``table``: piecewise-linear
    over ``(distance_m, pep)`` pairs, 1 beyond the last distance.
    """

    kind: str = "disk"
    eps: float = 0.02
    radius_m: float = 600.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("disk", "table"):
            raise ConfigError(f"unknown channel kind {self.kind!r}", "kind")
        if self.kind == "disk":
            if not 0.0 <= self.eps <= 1.0:
                raise ConfigError(f"eps must lie in [0, 1], got {self.eps}", "eps")
            if self.radius_m < 0:
                raise ConfigError("radius_m must be non-negative", "radius_m")
        else:
            if not self.table:
                raise ConfigError("table channel needs at least one (distance_m, pep) row", "table")
            dist = [r[0] for r in self.table]
            if any(b <= a for a, b in zip(dist, dist[1:])):
                raise ConfigError("table distances must be strictly increasing", "table")
            if any(not 0.0 <= r[1] <= 1.0 for r in self.table):
                raise ConfigError("table peps must lie in [0, 1]", "table")

    @classmethod
    def from_csv(cls, path) -> "ChannelModel":
        """Load a ``distance_m,pep`` trace."""
        path = Path(path)
        try:
            with path.open(newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["distance_m", "pep"]:
                    raise ConfigError(f"{path}: expected header 'distance_m,pep'")
                rows = []
                for lineno, rec in enumerate(reader, start=2):
                    try:
                        rows.append((float(rec["distance_m"]), float(rec["pep"])))
                    except (TypeError, ValueError):
                        raise ConfigError(f"{path}:{lineno}: malformed row") from None
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls(kind="table", table=tuple(rows))


def pep_at(ch: ChannelModel, distance_m: float) -> float:
    if distance_m < 0:
        raise DomainError("distance must be non-negative")
    if ch.kind == "disk":
        return ch.eps if distance_m <= ch.radius_m else 1.0
    dist, pep = zip(*ch.table)
    if distance_m > dist[-1]:
        return 1.0
    return float(min(max(np.interp(distance_m, dist, pep), 0.0), 1.0))


@dataclass(frozen=True)
class ScenarioConfig:
    R: int = 4
    isd_m: float = 1200.0
    width_m: float = 10.0  # kept for completeness; the 1-D channel ignores it
    K: int = 10
    N: int = 20
    d: int = 1
    C: int = 2
    q: int = 2
    channel: ChannelModel = ChannelModel()
    eaves_pos_m: float = 1200.0
    eaves_range_m: float = 600.0
    packet_len: int = 64
    trials: int = 10_000
    seed: int = 1
    poly: int = DEFAULT_POLY

    def __post_init__(self):
        if self.R < 2:
            raise ConfigError(f"R must be at least 2, got {self.R}", "R")
        if not 2 <= self.C <= self.R:
            raise ConfigError(f"C must satisfy 2 <= C <= R={self.R}, got {self.C}", "C")
        if self.K < 2:
            raise ConfigError(f"K must be at least 2, got {self.K}", "K")
        if self.N < self.K:
            raise ConfigError(f"N must be at least K={self.K}, got {self.N}", "N")
        if self.d < 1:
            raise ConfigError(f"d must be at least 1, got {self.d}", "d")
        if self.q not in (2, 256):
            raise ConfigError(f"q must be 2 or 256, got {self.q}", "q")
        if self.width_m < 0:
            raise ConfigError("width_m must be non-negative", "width_m")
        if self.isd_m <= 0:
            raise ConfigError("isd_m must be positive", "isd_m")
        if not 0.0 <= self.eaves_pos_m <= self.R * self.isd_m:
            raise ConfigError(f"eaves_pos_m must lie in [0, {self.R * self.isd_m:g}]", "eaves_pos_m")
        if self.eaves_range_m < 0:
            raise ConfigError("eaves_range_m must be non-negative", "eaves_range_m")
        if self.packet_len < 1:
            raise ConfigError("packet_len must be at least 1", "packet_len")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}", "trials")

    @property
    def window_m(self) -> float:
        return self.C * self.isd_m

    @property
    def n_epochs(self) -> int:
        return self.R // self.C

    def rsu_positions(self) -> np.ndarray:
        return (np.arange(1, self.R + 1) - 0.5) * self.isd_m

    def exposed_epoch(self) -> int:
        e = int(self.eaves_pos_m // self.window_m)
        return min(e, self.n_epochs - 1)


@dataclass(frozen=True)
class TransmissionPlan:
    x_m: np.ndarray
    message_index: np.ndarray
    reset_epoch: np.ndarray

    def __len__(self):
        return len(self.x_m)

    def indices(self, epoch: int, message_index: int | None = None) -> np.ndarray:
        mask = self.reset_epoch == epoch
        if message_index is not None:
            mask &= self.message_index == message_index
        return np.nonzero(mask)[0]


def build_schedule(cfg: ScenarioConfig) -> TransmissionPlan:
    """Place N*d transmissions uniformly in every complete reset window."""
    if cfg.R < cfg.C:
        raise ConfigError(f"R={cfg.R} is smaller than the reset area C={cfg.C}")
    n_tx = cfg.N * cfg.d
    t = np.arange(n_tx)
    xs, msgs, epochs = [], [], []
    for e in range(cfg.n_epochs):
        start = e * cfg.window_m
        xs.append(start + (t + 0.5) * cfg.window_m / n_tx)
        msgs.append(t % cfg.d + 1)
        epochs.append(np.full(n_tx, e))
    return TransmissionPlan(np.concatenate(xs), np.concatenate(msgs), np.concatenate(epochs))


def _link_peps(cfg: ScenarioConfig, x_m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PEP from each transmit position to every RSU (n, R) and the eavesdropper success prob (n,)."""
    rsu = cfg.rsu_positions()
    fog = np.array([[pep_at(cfg.channel, abs(x - r)) for r in rsu] for x in x_m]).reshape(len(x_m), cfg.R)
    eaves = np.array(
        [
            1.0 - pep_at(cfg.channel, abs(x - cfg.eaves_pos_m)) if abs(x - cfg.eaves_pos_m) <= cfg.eaves_range_m else 0.0
            for x in x_m
        ]
    )
    return fog, eaves


def success_probabilities(
    plan: TransmissionPlan,
    cfg: ScenarioConfig,
    receiver: str,
    message_index: int,
    epoch: int | None = None,
) -> list[float]:
    """Per-transmission reception probability of one message at the fog or the eavesdropper.

    The fog gets a packet if any RSU does; the eavesdropper only hears
    transmissions within ``eaves_range_m``.
    """
    if not 1 <= message_index <= cfg.d:
        raise DomainError(f"message_index {message_index} outside 1..{cfg.d}")
    if receiver not in ("fog", "eavesdropper"):
        raise DomainError(f"unknown receiver {receiver!r}")
    if epoch is None:
        epoch = cfg.exposed_epoch()
    idx = plan.indices(epoch, message_index)
    fog_pep, eaves_ok = _link_peps(cfg, plan.x_m[idx])
    if receiver == "fog":
        return [float(v) for v in 1.0 - np.prod(fog_pep, axis=1)]
    return [float(v) for v in eaves_ok]


class TrialOutcome(NamedTuple):
    message_index: int
    fog_decoded: bool
    eaves_decoded: bool
    fog_packets: np.ndarray | None = None


def run_trial(
    plan: TransmissionPlan,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    messages: Sequence[SourceMessage] | None = None,
    epoch: int | None = None,
) -> list[TrialOutcome]:
    """One packet-level pass of a batch of d messages through the corridor.

    Every transmission is a freshly encoded packet. Each RSU and the
    eavesdropper receive it independently; everything an RSU receives is fed
    into the fog decoder of that message, so a packet heard by two RSUs is
    ingested twice and the second copy is simply not innovative.
    """
    field = FieldSpec(cfg.q, cfg.poly)
    if epoch is None:
        epoch = cfg.exposed_epoch()
    if messages is None:
        messages = [
            SourceMessage(m, rng.integers(0, cfg.q, size=(cfg.K, cfg.packet_len), dtype=np.uint8))
            for m in range(1, cfg.d + 1)
        ]
    if len(messages) != cfg.d:
        raise DomainError(f"expected {cfg.d} messages, got {len(messages)}")
    by_slot = {m: msg for m, msg in zip(range(1, cfg.d + 1), messages)}
    fog = {m: DecoderState(msg.index, cfg.K, field) for m, msg in by_slot.items()}
    eaves = {m: DecoderState(msg.index, cfg.K, field) for m, msg in by_slot.items()}

    idx = plan.indices(epoch)
    fog_pep, eaves_ok = _link_peps(cfg, plan.x_m[idx])
    for row, i in enumerate(idx):
        m = int(plan.message_index[i])
        pkt = encode_packet(by_slot[m], field, rng)
        heard = rng.random(cfg.R) < 1.0 - fog_pep[row]
        for _ in range(int(heard.sum())):
            fog[m].ingest(pkt)
        if rng.random() < eaves_ok[row]:
            eaves[m].ingest(pkt)

    return [
        TrialOutcome(
            by_slot[m].index,
            fog[m].decodable,
            eaves[m].decodable,
            fog[m].extract() if fog[m].decodable else None,
        )
        for m in range(1, cfg.d + 1)
    ]


@dataclass(frozen=True)
class Estimate:
    """A probability estimate averaged over messages, with a 95% half-width.

    The half-width uses the Agresti-Coull adjusted normal approximation so it
    stays positive when a message is decoded in every trial or in none.
    """

    value: float
    trials: int
    ci_halfwidth: float
    per_message: tuple[float, ...] = field(default=())

    @classmethod
    def from_counts(cls, successes: Sequence[int], trials: int) -> "Estimate":
        successes = np.asarray(successes, dtype=float)
        per_message = successes / trials
        n_adj = trials + Z95**2
        p_adj = (successes + Z95**2 / 2) / n_adj
        hw = Z95 * np.sqrt(p_adj * (1 - p_adj) / n_adj)
        # messages use disjoint transmissions, so their estimates are independent
        ci = float(np.sqrt(np.sum(hw**2)) / len(successes))
        return cls(float(per_message.mean()), trials, ci, tuple(float(v) for v in per_message))


class MonteCarloResult(NamedTuple):
    D: Estimate
    I: Estimate


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _rank_block(cfg: ScenarioConfig, field: FieldSpec, fog_pep, eaves_ok, msg_of_tx, n_trials, seed_seq):
    """Coefficient-level trials: decodability only depends on the rank of what was received."""
    rng = np.random.default_rng(seed_seq)
    fog_hits = np.zeros(cfg.d, dtype=np.int64)
    eaves_hits = np.zeros(cfg.d, dtype=np.int64)
    packed = cfg.q == 2 and cfg.K <= 64
    for m in range(1, cfg.d + 1):
        tx = np.nonzero(msg_of_tx == m)[0]
        n = len(tx)
        if packed:
            words = rng.integers(0, 2**64 - 1, size=(n_trials, n), dtype=np.uint64, endpoint=True)
            words &= np.uint64((1 << cfg.K) - 1)
        else:
            coeffs = rng.integers(0, cfg.q, size=(n_trials, n, cfg.K), dtype=np.uint8)
        fog_rx = (rng.random((n_trials, n, cfg.R)) < 1.0 - fog_pep[tx]).any(axis=2)
        eaves_rx = rng.random((n_trials, n)) < eaves_ok[tx]
        for rx, hits in ((fog_rx, fog_hits), (eaves_rx, eaves_hits)):
            enough = rx.sum(axis=1) >= cfg.K
            if not enough.any():
                continue
            if packed:
                ranks = batch_rank_packed(words[enough], rx[enough], cfg.K)
            else:
                ranks = batch_rank(field, coeffs[enough], rx[enough])
            hits[m - 1] += int(np.count_nonzero(ranks == cfg.K))
    return fog_hits, eaves_hits


def _packet_block(cfg: ScenarioConfig, plan: TransmissionPlan, trial_ids, seed):
    fog_hits = np.zeros(cfg.d, dtype=np.int64)
    eaves_hits = np.zeros(cfg.d, dtype=np.int64)
    for t in trial_ids:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(t),)))
        for j, out in enumerate(run_trial(plan, cfg, rng)):
            fog_hits[j] += out.fog_decoded
            eaves_hits[j] += out.eaves_decoded
    return fog_hits, eaves_hits


def run_monte_carlo(cfg: ScenarioConfig, engine: str = "rank", threads: int | None = None) -> MonteCarloResult:
    """Estimate D and I over ``cfg.trials`` independent trials of the exposed epoch.

    ``engine="rank"`` simulates receptions and random coefficient vectors and
    checks the rank of what each receiver collected (payloads cannot change
    decodability). ``engine="packet"`` runs full :func:`run_trial` passes with
    real payloads and decoders; it is far slower.

    Trials are split into fixed blocks, each with its own seed substream, and
    block results are summed in block order, so the result does not depend on
    the number of worker threads.
    """
    if engine not in ("rank", "packet"):
        raise DomainError(f"unknown engine {engine!r}")
    plan = build_schedule(cfg)
    n_blocks = math.ceil(cfg.trials / BLOCK_TRIALS)
    sizes = [min(BLOCK_TRIALS, cfg.trials - b * BLOCK_TRIALS) for b in range(n_blocks)]
    workers = min(threads or worker_count(), n_blocks)

    if engine == "rank":
        field = FieldSpec(cfg.q, cfg.poly)
        idx = plan.indices(cfg.exposed_epoch())
        fog_pep, eaves_ok = _link_peps(cfg, plan.x_m[idx])
        msg_of_tx = plan.message_index[idx]

        def job(b):
            seq = np.random.SeedSequence(cfg.seed, spawn_key=(b,))
            return _rank_block(cfg, field, fog_pep, eaves_ok, msg_of_tx, sizes[b], seq)

    else:

        def job(b):
            start = b * BLOCK_TRIALS
            return _packet_block(cfg, plan, range(start, start + sizes[b]), cfg.seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n_blocks)))
    else:
        results = [job(b) for b in range(n_blocks)]

    fog = np.zeros(cfg.d, dtype=np.int64)
    eav = np.zeros(cfg.d, dtype=np.int64)
    for f, e in results:
        fog += f
        eav += e
    return MonteCarloResult(Estimate.from_counts(fog, cfg.trials), Estimate.from_counts(eav, cfg.trials))
