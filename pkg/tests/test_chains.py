import csv

import numpy as np
import pytest

from edpm.blocked import ChainConfig, run_chain
from edpm.chains import (Chain, ChainWriter, draw_to_record, iter_chain_file,
                         read_chain, record_to_draw, write_chain)
from edpm.core import Truncation
from edpm.errors import DomainError


@pytest.fixture
def short_chain(small_data, small_hp):
    cfg = ChainConfig(iterations=12, burn_in=4, thin=2, seed=1,
                      trunc=Truncation(3, 4))
    return run_chain(small_data, small_hp, cfg)


def test_record_round_trip(short_chain):
    d = short_chain[0]
    back = record_to_draw(draw_to_record(d))
    assert back.iter == d.iter
    assert back.representation == d.representation
    assert np.array_equal(back.state.theta_w, d.state.theta_w)
    assert np.array_equal(back.state.psi_mu, d.state.psi_mu)
    assert np.array_equal(back.state.K, d.state.K)
    assert back.state.alpha_theta == d.state.alpha_theta


def test_file_round_trip(tmp_path, short_chain):
    path = tmp_path / "chain.jsonl"
    write_chain(path, short_chain)
    back = read_chain(path)
    assert len(back) == len(short_chain)
    for a, b in zip(short_chain, back):
        assert a.iter == b.iter
        assert np.array_equal(a.state.theta_beta, b.state.theta_beta)
        assert np.array_equal(a.state.psi_tau, b.state.psi_tau)


def test_iter_chain_file_lazy(tmp_path, short_chain):
    path = tmp_path / "chain.jsonl"
    write_chain(path, short_chain)
    gen = iter_chain_file(path)
    first = next(gen)
    assert first.iter == short_chain[0].iter
    assert len(list(gen)) == len(short_chain) - 1


def test_read_chain_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"iter": 1, "broken\n')
    with pytest.raises(DomainError):
        read_chain(path)


def test_companion_csv(tmp_path, short_chain):
    path = tmp_path / "chain.jsonl"
    summary = tmp_path / "chain.csv"
    write_chain(path, short_chain, summary)
    with open(summary) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "alpha_theta", "alpha_psi_max", "n_k"]
    assert len(rows) == len(short_chain) + 1
    n_k, _ = short_chain[0].state.counts()
    assert rows[1][3] == "|".join(str(v) for v in n_k)
    assert float(rows[1][1]) == short_chain[0].state.alpha_theta


def test_chain_container_basics(short_chain):
    c = Chain()
    for d in short_chain:
        c.append(d)
    assert len(c) == len(short_chain)
    assert c[0] is short_chain[0]
    assert [d.iter for d in c] == [d.iter for d in short_chain]


def test_writer_streams_incrementally(tmp_path, short_chain):
    path = tmp_path / "chain.jsonl"
    w = ChainWriter(path)
    w.write(short_chain[0])
    w._fh.flush()
    assert len(read_chain(path)) == 1
    w.close()
