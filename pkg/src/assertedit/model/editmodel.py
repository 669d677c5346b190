"""
The neural edit model: co-attentive encoders over the retrieved assertion and the
edit sequence, and an LSTM decoder mixing generation with two copy distributions.
"""
from __future__ import annotations

import numpy as np

from typing import List, NamedTuple, Optional, Sequence, Tuple

from ..core.config import RunConfig
from ..core.editseq import Edit, EditSequence
from ..core.lexer import TokenSeq
from ..numcore import ops
from ..numcore.layers import BiLSTMOutput, bilstm_run, lstm_cell_step
from ..numcore.tensor import Tensor, constant
from .params import ACTION_IDS, ModelParams
from .vocab import ExtendedVocabulary, Vocabulary


class EncodedExample(NamedTuple):
    """
    One (retrieved assertion, edit sequence[, target]) triple turned into ids.
    Copy ids live in the extended vocabulary; embedding ids never exceed the vocabulary.
    """
    extended: ExtendedVocabulary
    assertion_ids: List[int]        # embedding ids of the retrieved assertion
    assertion_copy_ids: List[int]   # extended ids, one per assertion token
    retrieved_ids: List[int]        # embedding ids of the edits' retrieved slots
    input_ids: List[int]            # embedding ids of the edits' input slots
    action_ids: List[int]
    input_copy_ids: List[int]       # extended ids of the input slots, 0 where the slot is empty
    input_copy_mask: np.ndarray     # True where the input slot holds a token
    decoder_inputs: List[int]       # SOS + target, embedding ids
    targets: List[int]              # target + EOS, extended ids


class EncoderOutput(NamedTuple):
    h: Tensor              # assertion contextual vectors (Lx, 2H)
    h_edit: Tensor         # edit contextual vectors (Le, 2H)
    z: Tensor              # assertion final representations (Lx, 2H)
    z_edit: Tensor         # edit final representations (Le, 2H)
    alpha: Tensor          # assertion -> edit attention (Lx, Le)
    alpha_edit: Tensor     # edit -> assertion attention (Le, Lx)
    assertion_final: BiLSTMOutput
    edit_final: BiLSTMOutput


class DecoderState(NamedTuple):
    s: Tensor      # hidden state (1, D)
    cell: Tensor   # cell state (1, D)
    o: Tensor      # previous output vector (1, D)


class DecoderStep(NamedTuple):
    state: DecoderState
    context: Tensor         # c_j over Z (1, 2H)
    context_edit: Tensor    # c'_j over Z' (1, 2H)
    beta: Tensor            # (1, Lx)
    beta_edit: Tensor       # (1, Le)
    p_vocab: Tensor         # (1, V_ext), zero beyond the vocabulary
    p_assertion: Tensor     # (1, V_ext)
    p_focal: Tensor         # (1, V_ext)
    gamma: Tensor           # (1, 1)
    theta: Tensor           # (1, 1)
    mixture: Tensor         # (1, V_ext)

    @property
    def s(self) -> Tensor:
        return self.state.s

    @property
    def o(self) -> Tensor:
        return self.state.o


class EditModel:
    """
    Rewrites a retrieved assertion according to an edit sequence.
    """

    __slots__ = ("params", "vocab", "config")

    def __init__(self, params: ModelParams, vocab: Vocabulary, config: RunConfig) -> None:
        self.params: ModelParams = params
        self.vocab: Vocabulary = vocab
        self.config: RunConfig = config

    def compile(self, retrieved_assertion: TokenSeq, edits: EditSequence, target: Optional[TokenSeq] = None) -> EncodedExample:
        """
        Maps tokens to ids; copyable out-of-vocabulary tokens get extended ids.
        """
        if not retrieved_assertion or not edits:
            raise ValueError("encoding needs a non-empty retrieved assertion and edit sequence")

        vocab = self.vocab
        inputs: List[Optional[str]] = [e.input_token for e in edits]
        extended = ExtendedVocabulary(vocab, (retrieved_assertion, inputs))

        assertion_copy_ids = [extended.id(token) for token in retrieved_assertion]
        input_copy_ids = [extended.id(token) if token is not None else Vocabulary.PAD for token in inputs]
        target = list(target) if target is not None else []

        return EncodedExample(
            extended=extended,
            assertion_ids=vocab.ids(retrieved_assertion),
            assertion_copy_ids=assertion_copy_ids,
            retrieved_ids=vocab.ids(e.retrieved_token for e in edits),
            input_ids=vocab.ids(inputs),
            action_ids=[ACTION_IDS[e.action] for e in edits],
            input_copy_ids=input_copy_ids,
            input_copy_mask=np.array([token is not None for token in inputs], dtype=bool),
            decoder_inputs=[Vocabulary.SOS] + vocab.ids(target),
            targets=[extended.id(token) for token in target] + [Vocabulary.EOS],
        )

    def embed_edits(self, retrieved_ids: Sequence[int], input_ids: Sequence[int], action_ids: Sequence[int]) -> Tensor:
        """
        Rows [e_retrieved ⊕ e_input ⊕ e_action], one per edit.
        """
        table = self.params["token_embedding"]
        return ops.concat([
            ops.embedding_lookup(table, retrieved_ids),
            ops.embedding_lookup(table, input_ids),
            ops.embedding_lookup(self.params["action_embedding"], action_ids),
        ], axis=1)

    def embed_edit(self, edit: Edit) -> Tensor:
        return self.embed_edits([self.vocab.id(edit.retrieved_token)],
                                [self.vocab.id(edit.input_token)],
                                [ACTION_IDS[edit.action]])

    def encode(self, example: EncodedExample, training: bool = False, rng: Optional[np.random.Generator] = None) -> EncoderOutput:
        p = self.params
        rate = self.config.dropout

        # Contextual embedding layer:
        x = ops.embedding_lookup(p["token_embedding"], example.assertion_ids)
        edits = self.embed_edits(example.retrieved_ids, example.input_ids, example.action_ids)
        h = bilstm_run(ops.dropout(x, rate, training, rng),
                       p.lstm("assertion_context_fwd"), p.lstm("assertion_context_bwd")).outputs
        h_edit = bilstm_run(ops.dropout(edits, rate, training, rng),
                            p.lstm("edit_context_fwd"), p.lstm("edit_context_bwd")).outputs

        # Attention layer: one bilinear score matrix read in both directions:
        scores = ops.matmul(ops.matmul(h, ops.transpose(p["w_alpha"])), ops.transpose(h_edit))
        alpha = ops.softmax_masked(scores)
        alpha_edit = ops.softmax_masked(ops.transpose(scores))
        g = ops.matmul(alpha, h_edit)
        g_edit = ops.matmul(alpha_edit, h)

        # Modeling layer:
        assertion_final = bilstm_run(ops.dropout(ops.concat([g, h], axis=1), rate, training, rng),
                                     p.lstm("assertion_modeling_fwd"), p.lstm("assertion_modeling_bwd"))
        edit_final = bilstm_run(ops.dropout(ops.concat([g_edit, h_edit], axis=1), rate, training, rng),
                                p.lstm("edit_modeling_fwd"), p.lstm("edit_modeling_bwd"))

        return EncoderOutput(h, h_edit, assertion_final.outputs, edit_final.outputs,
                             alpha, alpha_edit, assertion_final, edit_final)

    def initial_state(self, encoded: EncoderOutput) -> DecoderState:
        """
        Projects the concatenated final modeling-layer states to the decoder width; o_0 = 0.
        """
        p = self.params
        final_h = ops.concat([encoded.assertion_final.final_h, encoded.edit_final.final_h], axis=1)
        final_c = ops.concat([encoded.assertion_final.final_c, encoded.edit_final.final_c], axis=1)
        s = ops.add(ops.matmul(final_h, p["init_h.w"]), p["init_h.b"])
        cell = ops.add(ops.matmul(final_c, p["init_c.w"]), p["init_c.b"])
        o = constant(np.zeros((1, self.config.decoder_dim)), like=s)
        return DecoderState(s, cell, o)

    def decode_step(self,
                    prev_id: int,
                    state: DecoderState,
                    encoded: EncoderOutput,
                    example: EncodedExample,
                    gates: Optional[Tuple[float, float]] = None,
                    training: bool = False,
                    rng: Optional[np.random.Generator] = None) -> DecoderStep:
        """
        One decoding step. `gates` forces (gamma, theta) to fixed values.
        """
        p = self.params
        width: int = len(example.extended)

        # Decoder LSTM over [e_prev ⊕ o_prev]:
        prev = ops.embedding_lookup(p["token_embedding"], [prev_id])
        x = ops.dropout(ops.concat([prev, state.o], axis=1), self.config.dropout, training, rng)
        s, cell = lstm_cell_step(x, state.s, state.cell, p.lstm("decoder"))

        # Attention over both encoder outputs:
        assertion_scores = ops.matmul(ops.matmul(s, p["attend_assertion"]), ops.transpose(encoded.z))
        edit_scores = ops.matmul(ops.matmul(s, p["attend_edits"]), ops.transpose(encoded.z_edit))
        beta = ops.softmax_masked(assertion_scores)
        beta_edit = ops.softmax_masked(edit_scores)
        context = ops.matmul(beta, encoded.z)
        context_edit = ops.matmul(beta_edit, encoded.z_edit)

        features = ops.concat([context, context_edit, s], axis=1)
        o = ops.tanh(ops.matmul(features, p["v_c"]))

        # Component distributions over the extended vocabulary:
        p_vocab = ops.pad_columns(ops.softmax_masked(ops.matmul(o, p["v_out"])), width - len(self.vocab))
        p_assertion = ops.scatter_sum(beta, example.assertion_copy_ids, width)
        if example.input_copy_mask.any():
            focal_weights = ops.softmax_masked(edit_scores, example.input_copy_mask[None, :])
            p_focal = ops.scatter_sum(focal_weights, example.input_copy_ids, width)
        else:
            p_focal = p_assertion

        if gates is None:
            gamma = ops.sigmoid(ops.add(ops.matmul(features, p["gamma.w"]), p["gamma.b"]))
            theta = ops.sigmoid(ops.add(ops.matmul(features, p["theta.w"]), p["theta.b"]))
        else:
            gamma = constant(np.full((1, 1), gates[0]), like=s)
            theta = constant(np.full((1, 1), gates[1]), like=s)

        mixture = ops.lerp(gamma, p_vocab, ops.lerp(theta, p_assertion, p_focal))
        return DecoderStep(DecoderState(s, cell, o), context, context_edit, beta, beta_edit,
                           p_vocab, p_assertion, p_focal, gamma, theta, mixture)

    def example_loss(self, example: EncodedExample, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        Summed teacher-forced cross-entropy over target + EOS, as a (1, 1) tensor.
        """
        encoded = self.encode(example, training, rng)
        state = self.initial_state(encoded)

        losses: List[Tensor] = []
        for prev_id, target in zip(example.decoder_inputs, example.targets):
            step = self.decode_step(prev_id, state, encoded, example, training=training, rng=rng)
            losses.append(ops.cross_entropy_masked(step.mixture, target))
            state = step.state
        return ops.add_n(losses)
