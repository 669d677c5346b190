import pytest

from assertedit.core.config import RunConfig
from assertedit.core.corpus import Dataset
from assertedit.core.evaluation import exact_match_accuracy
from assertedit.core.pipeline import Pipeline
from assertedit.core.retrieval import build_index
from assertedit.model.trainer import train
from conftest import make_tap, near_duplicate_corpus

pytestmark = pytest.mark.slow


def held_out_corpus(first_id):
    """
    Twenty near-duplicates of the training pairs. The first ten reuse a training
    name, so their retrieved prototype is already right; the last ten introduce a
    name never seen in training.
    """
    taps = []
    for i in range(20):
        name = f"alpha{i}" if i < 10 else f"gamma{i}"
        focal = f"void test{i} ( ) {{ Foo f = new Foo ( ) ; int {name} = f . get{i} ( ) ;"
        taps.append(make_tap(first_id + i, focal, f"assertEquals ( {i} , {name} )"))
    return taps


@pytest.fixture(scope="module")
def trained():
    # Default hyperparameters at reduced layer sizes:
    config = RunConfig(embed_dim=32, action_dim=16, hidden_dim=32, decoder_dim=64, max_epochs=200)
    dataset = Dataset("near-duplicates", train=near_duplicate_corpus(25))
    index = build_index(dataset.train)
    return dataset, index, train(dataset, index, config)


def test_overfits_training_set(trained) -> None:
    dataset, index, checkpoint = trained
    assert checkpoint.config.dropout == RunConfig().dropout
    pipeline = Pipeline(index, checkpoint)
    predictions = [pipeline.generate(tap.focal_test, exclude_id=tap.id) for tap in dataset.train]
    assert exact_match_accuracy(predictions, [tap.assertion for tap in dataset.train]) >= 90.0


def test_at_least_matches_retrieval_only_on_held_out(trained) -> None:
    _, index, checkpoint = trained
    held_out = held_out_corpus(first_id=1000)
    references = [tap.assertion for tap in held_out]
    edited = Pipeline(index, checkpoint).generate_batch([tap.focal_test for tap in held_out])
    baseline = Pipeline(index).generate_batch([tap.focal_test for tap in held_out])

    baseline_accuracy = exact_match_accuracy(baseline, references)
    assert baseline_accuracy == pytest.approx(50.0)
    assert exact_match_accuracy(edited, references) >= baseline_accuracy
