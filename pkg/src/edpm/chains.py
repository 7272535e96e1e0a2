"""Chain containers and on-disk persistence.

A chain is a sequence of per-iteration state snapshots. Draws persist as
JSONL (one draw per line) with a compact companion CSV carrying quick
diagnostics: alpha_theta, the largest nested concentration, and the
theta-cluster occupancy histogram.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .core import GibbsState, Truncation
from .errors import DomainError


@dataclass(frozen=True)
class ChainDraw:
    """One persisted posterior draw."""

    iter: int
    state: GibbsState
    representation: str = "truncated"  # "truncated" or "urn"


@dataclass
class Chain:
    """In-memory sequence of draws."""

    draws: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.draws)

    def __len__(self):
        return len(self.draws)

    def __getitem__(self, i):
        return self.draws[i]

    def append(self, draw: ChainDraw):
        self.draws.append(draw)


def draw_to_record(d: ChainDraw) -> dict:
    s = d.state
    return {
        "iter": d.iter,
        "representation": d.representation,
        "N": s.trunc.N,
        "M": s.trunc.M,
        "theta_V": s.theta_V.tolist(),
        "theta_w": s.theta_w.tolist(),
        "psi_V": s.psi_V.tolist(),
        "psi_w": s.psi_w.tolist(),
        "beta": s.theta_beta.tolist(),
        "tau_y": s.theta_tau.tolist(),
        "mu": s.psi_mu.tolist(),
        "tau_x": s.psi_tau.tolist(),
        "K": s.K.tolist(),
        "J": s.J.tolist(),
        "alpha_theta": float(s.alpha_theta),
        "alpha_psi": s.alpha_psi.tolist(),
    }


def record_to_draw(rec: dict) -> ChainDraw:
    state = GibbsState(
        trunc=Truncation(rec["N"], rec["M"]),
        theta_V=np.array(rec["theta_V"]),
        theta_w=np.array(rec["theta_w"]),
        psi_V=np.array(rec["psi_V"]),
        psi_w=np.array(rec["psi_w"]),
        theta_beta=np.array(rec["beta"]),
        theta_tau=np.array(rec["tau_y"]),
        psi_mu=np.array(rec["mu"]),
        psi_tau=np.array(rec["tau_x"]),
        K=np.array(rec["K"], dtype=int),
        J=np.array(rec["J"], dtype=int),
        alpha_theta=rec["alpha_theta"],
        alpha_psi=np.array(rec["alpha_psi"]),
    )
    return ChainDraw(iter=rec["iter"], state=state,
                     representation=rec["representation"])


class ChainWriter:
    """Streams draws to a JSONL file plus the companion diagnostics CSV.

    Writes incrementally so an interrupted run keeps completed draws.
    """

    def __init__(self, jsonl_path, summary_csv_path=None):
        self.jsonl_path = str(jsonl_path)
        self.summary_csv_path = (
            str(summary_csv_path) if summary_csv_path is not None else None)
        self._fh = open(self.jsonl_path, "w")
        self._csv_fh = None
        self._csv = None
        if self.summary_csv_path is not None:
            self._csv_fh = open(self.summary_csv_path, "w", newline="")
            self._csv = csv.writer(self._csv_fh)
            self._csv.writerow(["iter", "alpha_theta", "alpha_psi_max", "n_k"])

    def write(self, d: ChainDraw):
        self._fh.write(json.dumps(draw_to_record(d)) + "\n")
        if self._csv is not None:
            n_k, _ = d.state.counts()
            self._csv.writerow([
                d.iter,
                repr(float(d.state.alpha_theta)),
                repr(float(np.max(d.state.alpha_psi))),
                "|".join(str(v) for v in n_k),
            ])

    def close(self):
        self._fh.close()
        if self._csv_fh is not None:
            self._csv_fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_chain(path, chain, summary_csv_path=None) -> None:
    with ChainWriter(path, summary_csv_path) as w:
        for d in chain:
            w.write(d)


def read_chain(path) -> Chain:
    chain = Chain()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                raise DomainError(f"{path}:{lineno}: invalid JSON") from None
            chain.append(record_to_draw(rec))
    return chain


def iter_chain_file(path):
    """Lazily iterate draws from a JSONL chain file."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield record_to_draw(json.loads(line))
