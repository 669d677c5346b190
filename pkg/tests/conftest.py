import json

import numpy as np
import pytest

from assertedit.core.config import RunConfig
from assertedit.core.corpus import TAP
from assertedit.model.params import ModelParams
from assertedit.model.vocab import build_vocab
from assertedit.numcore.tensor import CHECK_DTYPE


def make_tap(tap_id: int, focal: str, assertion: str) -> TAP:
    return TAP(tap_id, focal.split(), assertion.split())


def near_duplicate_corpus(n_pairs: int, first_id: int = 0):
    """
    Pairs of TAPs whose focal-tests differ in one name and whose assertions differ
    in that same name.
    """
    taps = []
    for i in range(n_pairs):
        for j, name in enumerate((f"alpha{i}", f"beta{i}")):
            focal = f"void test{i} ( ) {{ Foo f = new Foo ( ) ; int {name} = f . get{i} ( ) ;"
            assertion = f"assertEquals ( {i} , {name} )"
            taps.append(make_tap(first_id + 2 * i + j, focal, assertion))
    return taps


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write((record if isinstance(record, str) else json.dumps(record)) + "\n")


@pytest.fixture
def toy_taps():
    return [
        make_tap(0, "void testAdd ( ) { int x = add ( 1 , 2 ) ;", "assertEquals ( 3 , x )"),
        make_tap(1, "void testSub ( ) { int x = sub ( 3 , 2 ) ;", "assertEquals ( 1 , x )"),
        make_tap(2, "void testEmpty ( ) { List l = new List ( ) ;", "assertTrue ( l . isEmpty ( ) )"),
        make_tap(3, "void testNull ( ) { Foo f = make ( ) ;", "assertNotNull ( f )"),
        make_tap(4, "void testMul ( ) { int x = mul ( 2 , 2 ) ;", "assertEquals ( 4 , x )"),
    ]


@pytest.fixture
def tiny_config():
    return RunConfig(embed_dim=6, action_dim=3, hidden_dim=4, decoder_dim=5, dropout=0.0,
                     max_epochs=5, patience=5, batch_size=4, seed=0)


@pytest.fixture
def tiny_params(toy_taps, tiny_config):
    """
    64-bit parameters for gradient checks.
    """
    vocab = build_vocab(toy_taps)
    params = ModelParams.initialize(tiny_config, vocab, np.random.default_rng(0), dtype=CHECK_DTYPE)
    return params, vocab
