"""Command-line entry point: ``rlnc-offload {sweep,validate,offload-demo}``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
Errors are reported as a single ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analytic
from .config import LoadedConfig, load
from .errors import ConfigError
from .gf import FieldSpec, batch_rank
from .rlnc import SourceMessage, bytes_to_symbols, reassemble_stream, segment_stream, symbols_to_bytes
from .sim import Estimate, build_schedule, run_monte_carlo, run_trial, success_probabilities

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SWEEP_COLUMNS = [
    "q", "K", "d", "C", "overhead",
    "D_analytic", "I_analytic", "D_mc", "I_mc", "ci_D", "ci_I", "trials", "seed",
]

FULL_RANK_POINTS = [(10, 10), (12, 10), (15, 10), (20, 20)]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class SweepRow:
    q: int
    K: int
    d: int
    C: int
    overhead: int
    D_analytic: float
    I_analytic: float
    D_mc: float
    I_mc: float
    ci_D: float
    ci_I: float
    trials: int
    seed: int

    def as_csv(self) -> list[str]:
        return [
            str(self.q), str(self.K), str(self.d), str(self.C), str(self.overhead),
            *(f"{v:.8f}" for v in (self.D_analytic, self.I_analytic, self.D_mc, self.I_mc, self.ci_D, self.ci_I)),
            str(self.trials), str(self.seed),
        ]


def _apply_overrides(loaded: LoadedConfig, args) -> LoadedConfig:
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if not changes:
        return loaded
    try:
        scenario = replace(loaded.scenario, **changes)
    except ConfigError as exc:
        raise ConfigError(f"command line: {exc}") from None
    return replace(loaded, scenario=scenario)


def _grid_configs(loaded: LoadedConfig):
    g = loaded.sweep
    return list(analytic.sweep_configs(loaded.scenario, g.overhead, g.q, g.K, g.d, g.C))


def sweep_rows(loaded: LoadedConfig) -> list[SweepRow]:
    rows = []
    for cfg in _grid_configs(loaded):
        a = analytic.evaluate(cfg)
        mc = run_monte_carlo(cfg)
        rows.append(
            SweepRow(
                cfg.q, cfg.K, cfg.d, cfg.C, cfg.N - cfg.K,
                a.D, a.I, mc.D.value, mc.I.value, mc.D.ci_halfwidth, mc.I.ci_halfwidth,
                cfg.trials, cfg.seed,
            )
        )
    return rows


def format_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())
    return buf.getvalue()


def cmd_sweep(args) -> int:
    loaded = _apply_overrides(load(args.config), args)
    text = format_csv(sweep_rows(loaded))
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)
    return EXIT_OK


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _agree(name: str, mc: Estimate, exact: float, label: str) -> Check:
    tol = 3 * mc.ci_halfwidth
    diff = abs(mc.value - exact)
    return Check(name, diff <= tol, f"{label} mc={mc.value:.5f} analytic={exact:.5f} |diff|={diff:.5f} tol={tol:.5f}")


def validation_checks(loaded: LoadedConfig) -> list[Check]:
    """Analytic-vs-simulation and monotonicity checks for the configured scenario and sweep."""
    scen = loaded.scenario
    checks: list[Check] = []

    rng = np.random.default_rng(np.random.SeedSequence(scen.seed, spawn_key=(0xF0,)))
    for q in (2, 256):
        field = FieldSpec(q, scen.poly)
        for n, K in FULL_RANK_POINTS:
            coeffs = rng.integers(0, q, size=(scen.trials, n, K), dtype=np.uint8)
            hits = int(np.count_nonzero(batch_rank(field, coeffs) == K))
            est = Estimate.from_counts([hits], scen.trials)
            checks.append(_agree("full-rank agreement", est, analytic.p_full_rank(n, K, q), f"n={n} K={K} q={q}"))

    for q in (2, 256):
        for K in sorted(set(loaded.sweep.K)):
            vals = [analytic.p_full_rank(n, K, q) for n in range(K, K + 11)]
            # strictly increasing until it rounds to 1.0 in double precision
            ok = all(b > a or a == b == 1.0 for a, b in zip(vals, vals[1:]))
            checks.append(Check("full-rank monotone in n", ok, f"K={K} q={q}"))
        if q == 256:
            for K in sorted(set(loaded.sweep.K)):
                ok = all(analytic.p_full_rank(n, K, 256) >= analytic.p_full_rank(n, K, 2) for n in range(K, K + 11))
                checks.append(Check("full-rank monotone in q", ok, f"K={K}"))

    groups: dict[tuple, list[tuple[int, float]]] = {}
    for cfg in _grid_configs(loaded):
        plan = build_schedule(cfg)
        label = f"q={cfg.q} K={cfg.K} d={cfg.d} C={cfg.C} N-K={cfg.N - cfg.K}"
        worst = 0.0
        for m in range(1, cfg.d + 1):
            for receiver in ("fog", "eavesdropper"):
                pmf = analytic.reception_pmf(success_probabilities(plan, cfg, receiver, m))
                worst = max(worst, abs(pmf.sum() - 1.0))
        checks.append(Check("pmf normalization", worst <= 1e-12, f"{label} max|sum-1|={worst:.2e}"))
        a = analytic.evaluate(cfg)
        mc = run_monte_carlo(cfg)
        checks.append(_agree("recovery agreement", mc.D, a.D, label))
        checks.append(_agree("intercept agreement", mc.I, a.I, label))
        groups.setdefault((cfg.q, cfg.K, cfg.d, cfg.C), []).append((cfg.N - cfg.K, a.D))

    for (q, K, d, C), pts in groups.items():
        pts.sort()
        ok = all(b[1] >= a[1] - 1e-12 for a, b in zip(pts, pts[1:]))
        checks.append(Check("recovery monotone in overhead", ok, f"q={q} K={K} d={d} C={C}"))
    return checks


def cmd_validate(args) -> int:
    loaded = _apply_overrides(load(args.config), args)
    checks = validation_checks(loaded)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"validate: {len(checks)} checks, {len(failed)} failed")
    if failed:
        names = sorted({c.name for c in failed})
        print(f"error: failed checks: {', '.join(names)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def offload(data: bytes, cfg) -> tuple[list[str], bytes | None, bool]:
    """Push ``data`` through the corridor once. Returns report lines, fog bytes, success flag."""
    symbols = bytes_to_symbols(data, cfg.q)
    messages = segment_stream(symbols, cfg.K, cfg.packet_len)
    lines = [f"input: {len(data)} bytes -> {len(messages)} source messages (K={cfg.K}, q={cfg.q})"]
    if not messages:
        lines.append("nothing to offload")
        return lines, b"", True

    plan = build_schedule(cfg)
    rng = np.random.default_rng(cfg.seed)
    recovered: dict[int, np.ndarray] = {}
    fog_ok = eaves_ok = 0
    for b in range(0, len(messages), cfg.d):
        batch = list(messages[b : b + cfg.d])
        n_real = len(batch)
        while len(batch) < cfg.d:
            filler = np.zeros((cfg.K, cfg.packet_len), dtype=np.uint8)
            batch.append(SourceMessage(messages[-1].index + len(batch) - n_real + 1, filler))
        # batches beyond the corridor reuse its geometry from the start
        epoch = (b // cfg.d) % cfg.n_epochs
        for out in run_trial(plan, cfg, rng, messages=batch, epoch=epoch)[:n_real]:
            fog_ok += out.fog_decoded
            eaves_ok += out.eaves_decoded
            if out.fog_decoded:
                recovered[out.message_index] = out.fog_packets
            lines.append(
                f"message {out.message_index}: epoch={epoch} "
                f"fog={'decoded' if out.fog_decoded else 'missing'} "
                f"eavesdropper={'decoded' if out.eaves_decoded else 'missing'}"
            )
    lines.append(f"fog decoded {fog_ok}/{len(messages)}, eavesdropper decoded {eaves_ok}/{len(messages)}")
    if fog_ok < len(messages):
        lines.append("reassembly: incomplete")
        return lines, None, True
    rebuilt = reassemble_stream(
        [SourceMessage(m.index, recovered[m.index]) for m in messages], len(symbols)
    )
    out_bytes = symbols_to_bytes(rebuilt, cfg.q)
    same = out_bytes == data
    lines.append(f"reassembly: {'identical to input' if same else 'MISMATCH'} ({len(out_bytes)} bytes)")
    return lines, out_bytes, same


def cmd_offload_demo(args) -> int:
    loaded = _apply_overrides(load(args.config), args)
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.input}: {exc.strerror}") from None
    lines, out_bytes, ok = offload(data, loaded.scenario)
    for line in lines:
        print(line)
    if args.out and out_bytes is not None:
        try:
            Path(args.out).write_bytes(out_bytes)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rlnc-offload", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="scenario file, or the name of a bundled one")
        p.add_argument("--trials", type=int, help="override the configured trial count")
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("sweep", help="analytic and Monte Carlo D/I over the configured grid, as CSV")
    common(p)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check analytic results against simulation")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("offload-demo", help="offload a file through one packet-level trial")
    p.add_argument("input", help="file to offload")
    common(p)
    p.add_argument("--out", help="write the fog's reassembled bytes here")
    p.set_defaults(func=cmd_offload_demo)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
