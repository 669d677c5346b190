import json

import numpy as np
import pytest

from assertedit.core.config import RunConfig
from assertedit.core.corpus import Dataset
from assertedit.core.editseq import Edit, EditAction, align
from assertedit.core.retrieval import build_index
from assertedit.errors import CheckpointError
from assertedit.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from assertedit.model.editmodel import EditModel
from assertedit.model.generator import Generator
from assertedit.model.params import ModelParams
from assertedit.model.trainer import train
from assertedit.model.vocab import ExtendedVocabulary, Vocabulary, build_vocab
from assertedit.numcore.gradcheck import grad_check
from assertedit.numcore.ops import cross_entropy_masked
from assertedit.numcore.tensor import Tensor
from conftest import make_tap

RETRIEVED_FOCAL = "void testAdd ( ) { int x = add ( 1 , 2 ) ;".split()
INPUT_FOCAL = "void testSub ( ) { int y = sub ( 3 , 2 ) ; newName".split()
RETRIEVED_ASSERTION = "assertEquals ( 3 , x )".split()


def random_example(rng, vocab, model):
    tokens = vocab.to_list() + ["oovA", "oovB"]
    focal_a = [tokens[i] for i in rng.integers(0, len(tokens), size=int(rng.integers(1, 8)))]
    focal_b = [tokens[i] for i in rng.integers(0, len(tokens), size=int(rng.integers(1, 8)))]
    assertion = [tokens[i] for i in rng.integers(0, len(tokens), size=int(rng.integers(1, 6)))]
    return model.compile(assertion, align(focal_a, focal_b))


@pytest.fixture
def model64(tiny_params, tiny_config):
    params, vocab = tiny_params
    return EditModel(params, vocab, tiny_config)


@pytest.fixture
def example(model64):
    return model64.compile(RETRIEVED_ASSERTION, align(RETRIEVED_FOCAL, INPUT_FOCAL))


class TestVocabulary:
    def test_min_count(self) -> None:
        vocab = build_vocab([make_tap(0, "a a a", "b")], min_count=2)
        assert "a" in vocab
        assert "b" not in vocab
        assert vocab.id("b") == Vocabulary.UNK

    def test_specials_fixed(self) -> None:
        vocab = build_vocab([make_tap(0, "x", "y")])
        assert vocab.itos[:5] == list(Vocabulary.SPECIALS)
        assert vocab.id(None) == Vocabulary.EMPTY

    def test_frequency_then_lexicographic(self, toy_taps) -> None:
        vocab = build_vocab(toy_taps)
        assert vocab.to_list() == build_vocab(list(reversed(toy_taps))).to_list()
        assert vocab.to_list()[0] == "("

    def test_extended_ids(self) -> None:
        vocab = build_vocab([make_tap(0, "a", "b")])
        extended = ExtendedVocabulary(vocab, (["a", "q1"], [None, "q2", "q1"]))
        assert extended.id("q1") == len(vocab)
        assert extended.id("q2") == len(vocab) + 1
        assert extended.token(len(vocab) + 1) == "q2"
        assert extended.input_id(len(vocab)) == Vocabulary.UNK


class TestEmbedEdit:
    def test_width(self, tiny_config, toy_taps) -> None:
        config = RunConfig(embed_dim=300, action_dim=16, hidden_dim=2, decoder_dim=2)
        vocab = build_vocab(toy_taps)
        model = EditModel(ModelParams.initialize(config, vocab, np.random.default_rng(0)), vocab, config)
        assert model.embed_edit(Edit("x", "x", EditAction.EQUAL)).shape == (1, 616)

    def test_equal_edit_repeats_token(self, model64) -> None:
        row = model64.embed_edit(Edit("x", "x", EditAction.EQUAL)).data[0]
        assert np.array_equal(row[:6], row[6:12])

    def test_insert_uses_empty_embedding(self, model64) -> None:
        row = model64.embed_edit(Edit(None, "x", EditAction.INSERT)).data[0]
        assert np.array_equal(row[:6], model64.params["token_embedding"].data[Vocabulary.EMPTY])


class TestEncode:
    def test_shapes(self, model64, example) -> None:
        encoded = model64.encode(example)
        n_edits = len(example.action_ids)
        assert encoded.h.shape == (len(RETRIEVED_ASSERTION), 8)
        assert encoded.h_edit.shape == (n_edits, 8)
        assert encoded.z.shape == (len(RETRIEVED_ASSERTION), 8)
        assert encoded.z_edit.shape == (n_edits, 8)

    def test_attention_rows_sum_to_one(self, model64, example) -> None:
        encoded = model64.encode(example)
        assert encoded.alpha.data.sum(axis=1) == pytest.approx(np.ones(len(RETRIEVED_ASSERTION)), abs=1e-6)
        assert encoded.alpha_edit.data.sum(axis=1) == pytest.approx(np.ones(len(example.action_ids)), abs=1e-6)

    def test_zero_w_alpha_is_uniform(self, model64, example) -> None:
        model64.params["w_alpha"].data[...] = 0.0
        encoded = model64.encode(example)
        n_edits = len(example.action_ids)
        assert np.allclose(encoded.alpha.data, 1.0 / n_edits)
        assert np.allclose(encoded.alpha_edit.data, 1.0 / len(RETRIEVED_ASSERTION))

    def test_single_token_assertion(self, model64) -> None:
        example = model64.compile(["fail"], align(["a", "b"], ["a", "c"]))
        encoded = model64.encode(example)
        assert np.array_equal(encoded.alpha_edit.data, np.ones((len(example.action_ids), 1)))

    def test_empty_input(self, model64) -> None:
        with pytest.raises(ValueError):
            model64.compile([], align(["a"], ["b"]))


class TestDecodeStep:
    def step(self, model, example, gates=None):
        encoded = model.encode(example)
        return model.decode_step(Vocabulary.SOS, model.initial_state(encoded), encoded, example, gates)

    def random_models(self, config, vocab, trials):
        rng = np.random.default_rng(1234)
        for trial in range(trials):
            params = ModelParams.initialize(config, vocab, np.random.default_rng(trial), dtype=np.float64)
            model = EditModel(params, vocab, config)
            yield model, random_example(rng, vocab, model)

    def test_distributions_sum_to_one(self, tiny_params, tiny_config) -> None:
        _, vocab = tiny_params
        for model, example in self.random_models(tiny_config, vocab, 1000):
            step = self.step(model, example)
            for dist in (step.p_vocab, step.p_assertion, step.p_focal, step.mixture):
                assert dist.data.min() >= 0.0
                assert dist.data.sum() == pytest.approx(1.0, abs=1e-6)
            assert 0.0 <= step.gamma.item() <= 1.0
            assert 0.0 <= step.theta.item() <= 1.0
            assert step.beta.data.sum() == pytest.approx(1.0, abs=1e-6)

    def test_gamma_one_is_vocab(self, model64, example) -> None:
        step = self.step(model64, example, gates=(1.0, 0.3))
        assert np.array_equal(step.mixture.data, step.p_vocab.data)

    def test_copy_from_assertion_only(self, tiny_params, tiny_config) -> None:
        _, vocab = tiny_params
        for model, example in self.random_models(tiny_config, vocab, 200):
            step = self.step(model, example, gates=(0.0, 1.0))
            assert set(np.flatnonzero(step.mixture.data[0])) <= set(example.assertion_copy_ids)
            assert step.mixture.data.sum() == pytest.approx(1.0, abs=1e-6)

    def test_copy_from_focal_test_only(self, tiny_params, tiny_config) -> None:
        _, vocab = tiny_params
        for model, example in self.random_models(tiny_config, vocab, 200):
            step = self.step(model, example, gates=(0.0, 0.0))
            support = set(np.flatnonzero(step.mixture.data[0]))
            copyable = {i for i, ok in zip(example.input_copy_ids, example.input_copy_mask) if ok}
            # Nothing to copy from the focal-test: the assertion copy stands in.
            assert support <= (copyable or set(example.assertion_copy_ids))
            assert step.mixture.data.sum() == pytest.approx(1.0, abs=1e-6)

    def test_copies_new_focal_test_token(self, model64, example) -> None:
        step = self.step(model64, example, gates=(0.0, 0.0))
        assert step.mixture.data[0, example.extended.id("newName")] > 0.0

    def test_out_of_vocabulary_tokens_get_extended_ids(self, example) -> None:
        assert example.extended.oov == ["y", "newName"]


class TestGradients:
    # Small enough to probe every entry of every parameter:
    CONFIG = RunConfig(embed_dim=3, action_dim=2, hidden_dim=2, decoder_dim=3, dropout=0.0)

    def model(self, seed):
        vocab = build_vocab([make_tap(0, " ".join(RETRIEVED_FOCAL), " ".join(RETRIEVED_ASSERTION))])
        params = ModelParams.initialize(self.CONFIG, vocab, np.random.default_rng(seed), dtype=np.float64)
        return EditModel(params, vocab, self.CONFIG)

    @pytest.mark.parametrize("seed", range(5))
    def test_end_to_end_one_step(self, seed) -> None:
        model = self.model(seed)
        example = model.compile(RETRIEVED_ASSERTION, align(RETRIEVED_FOCAL, INPUT_FOCAL), ["newName"])
        params = [t for _, t in model.params]

        def loss():
            encoded = model.encode(example)
            state = model.initial_state(encoded)
            step = model.decode_step(example.decoder_inputs[0], state, encoded, example)
            return cross_entropy_masked(step.mixture, example.targets[0])

        assert grad_check(loss, params, seed=seed) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_teacher_forced_loss(self, seed) -> None:
        model = self.model(seed)
        example = model.compile(RETRIEVED_ASSERTION, align(RETRIEVED_FOCAL, INPUT_FOCAL), "assertEquals ( newName )".split())
        params = [t for _, t in model.params]
        assert grad_check(lambda: model.example_loss(example), params, seed=seed) < 1e-4


class TestGenerator:
    def test_copies_out_of_vocabulary_token_verbatim(self, model64) -> None:
        p = model64.params
        p["gamma.w"].data[...] = 0.0
        p["theta.w"].data[...] = 0.0
        p["gamma.b"].data[...] = -50.0
        p["theta.b"].data[...] = -50.0
        tokens = Generator(model64, max_len=3).generate(["fail", "(", ")"], align(["a"], ["zzzUnseen"]))
        assert "zzzUnseen" not in model64.vocab
        assert tokens[0] == "zzzUnseen"

    def test_eos_first_is_empty(self, model64, monkeypatch) -> None:
        original = EditModel.decode_step

        def eos_only(self, *args, **kwargs):
            step = original(self, *args, **kwargs)
            mixture = np.zeros_like(step.mixture.data)
            mixture[0, Vocabulary.EOS] = 1.0
            return step._replace(mixture=Tensor(mixture))

        monkeypatch.setattr(EditModel, "decode_step", eos_only)
        generator = Generator(model64, max_len=5)
        assert generator.generate(["fail"], align(["a"], ["a"])) == []
        assert Generator(model64, max_len=5, beam_size=3).generate(["fail"], align(["a"], ["a"])) == []

    def test_greedy_respects_max_len(self, model64) -> None:
        tokens = Generator(model64, max_len=4).generate(RETRIEVED_ASSERTION, align(RETRIEVED_FOCAL, INPUT_FOCAL))
        assert len(tokens) <= 4

    def test_beam_of_one_matches_greedy(self, model64) -> None:
        generator = Generator(model64, max_len=6, beam_size=1)
        example = model64.compile(RETRIEVED_ASSERTION, align(RETRIEVED_FOCAL, INPUT_FOCAL))
        encoded = model64.encode(example)
        assert generator._greedy(example, encoded) == generator._beam(example, encoded)
        edits = align(RETRIEVED_FOCAL, INPUT_FOCAL)
        assert len(Generator(model64, max_len=6, beam_size=4).generate(RETRIEVED_ASSERTION, edits)) <= 6


def _rewrite_header(path, change) -> None:
    data = path.read_bytes()
    size = int.from_bytes(data[8:12], "little")
    header = json.loads(data[12:12 + size])
    change(header)
    encoded = json.dumps(header).encode("utf-8")
    path.write_bytes(data[:8] + len(encoded).to_bytes(4, "little") + encoded + data[12 + size:])


class TestCheckpoint:
    @pytest.fixture
    def saved(self, tmp_path, toy_taps, tiny_config):
        vocab = build_vocab(toy_taps)
        params = ModelParams.initialize(tiny_config, vocab, np.random.default_rng(7))
        checkpoint = Checkpoint(params, vocab, tiny_config)
        path = tmp_path / "model.ckpt"
        save_checkpoint(checkpoint, path)
        return checkpoint, path

    def test_round_trip_is_bit_exact(self, saved) -> None:
        checkpoint, path = saved
        loaded = load_checkpoint(path)
        assert loaded.config == checkpoint.config
        assert loaded.vocab.itos == checkpoint.vocab.itos
        for (name, a), (other, b) in zip(checkpoint.params, loaded.params):
            assert name == other
            assert a.data.dtype == b.data.dtype
            assert np.array_equal(a.data, b.data)

    def test_bad_magic(self, saved) -> None:
        _, path = saved
        path.write_bytes(b"NOPE" + path.read_bytes()[4:])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_version_mismatch(self, saved) -> None:
        _, path = saved
        data = path.read_bytes()
        path.write_bytes(data[:4] + (99).to_bytes(4, "little") + data[8:])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated(self, saved) -> None:
        _, path = saved
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_trailing_bytes(self, saved) -> None:
        _, path = saved
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_declared_blob_length_mismatch(self, saved) -> None:
        _, path = saved
        _rewrite_header(path, lambda header: header["params"][0].update(nbytes=4))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_shape_inconsistent_with_config(self, saved) -> None:
        _, path = saved
        _rewrite_header(path, lambda header: header["params"][0].update(shape=[1, 1]))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


class TestPretrainedEmbeddings:
    def test_loaded_and_frozen(self, tmp_path, toy_taps) -> None:
        path = tmp_path / "vectors.txt"
        path.write_text("2 3\nassertEquals 0.5 0.25 -1\nunused 9 9 9\n")
        config = RunConfig(embed_dim=3, action_dim=2, hidden_dim=2, decoder_dim=2,
                           embedding_mode="pretrained", embedding_path=str(path))
        vocab = build_vocab(toy_taps)
        params = ModelParams.initialize(config, vocab, np.random.default_rng(0))
        table = params["token_embedding"]
        assert table.data[vocab.id("assertEquals")] == pytest.approx([0.5, 0.25, -1.0])
        assert not table.requires_grad
        assert all(t is not table for t in params.trainable())

    def test_missing_file(self, toy_taps) -> None:
        config = RunConfig(embedding_mode="pretrained", embedding_path="/nonexistent/vectors.txt")
        with pytest.raises(FileNotFoundError):
            ModelParams.initialize(config, build_vocab(toy_taps), np.random.default_rng(0))


class TestTrain:
    def dataset(self, toy_taps):
        return Dataset("toy", train=toy_taps)

    def test_loss_decreases(self, toy_taps, tiny_config) -> None:
        # One full batch per epoch; perplexity is the dropout-free loss on that batch:
        config = tiny_config._replace(batch_size=8, max_epochs=5, patience=5, dropout=RunConfig().dropout)
        d = self.dataset(toy_taps)
        checkpoint = train(d, build_index(d.train), config)
        losses = [stats.perplexity for stats in checkpoint.history]
        assert len(losses) == 5
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_deterministic(self, toy_taps, tiny_config) -> None:
        config = tiny_config._replace(max_epochs=2)
        d = self.dataset(toy_taps)
        first = train(d, build_index(d.train), config)
        second = train(d, build_index(d.train), config)
        assert first.history == second.history
        for (_, a), (_, b) in zip(first.params, second.params):
            assert np.array_equal(a.data, b.data)

    def test_best_epoch_is_kept(self, toy_taps, tiny_config) -> None:
        config = tiny_config._replace(max_epochs=4)
        d = Dataset("toy", train=toy_taps[:4], validation=toy_taps[4:])
        checkpoint = train(d, build_index(d.train), config)
        best = min(stats.perplexity for stats in checkpoint.history)
        assert checkpoint.history[checkpoint.best_epoch - 1].perplexity == best
        assert best <= checkpoint.history[-1].perplexity

    def test_empty_training_set(self, tiny_config, toy_taps) -> None:
        from assertedit.errors import TrainingError

        with pytest.raises(TrainingError):
            train(Dataset("empty", test=toy_taps), build_index(toy_taps), tiny_config)

    def test_workers_do_not_change_the_outcome(self, toy_taps, tiny_config) -> None:
        d = self.dataset(toy_taps)
        one = train(d, build_index(d.train), tiny_config._replace(max_epochs=1, workers=1))
        four = train(d, build_index(d.train), tiny_config._replace(max_epochs=1, workers=4))
        assert one.history == four.history
