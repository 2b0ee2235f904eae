import numpy as np
import pytest

from warmsum import tensor as T
from warmsum.assembly import AssemblyMode, assemble
from warmsum.decoding import (BANNED_GENERATION_IDS, BeamHypothesis, adjusted_score,
                              beam_search, beam_search_hypothesis, greedy_decode,
                              greedy_decode_batch, length_penalty, sequence_logprob)
from warmsum.errors import DataError
from warmsum.model import EncoderDecoderModel, ModelConfig
from warmsum.tokenizer import BOS, EOS, PAD


def random_model(seed, vocab_size=12, max_positions=16):
    cfg = ModelConfig(vocab_size=vocab_size, d_model=8, n_heads=2, d_ff=16,
                      n_enc_layers=1, n_dec_layers=1, max_positions=max_positions,
                      dropout=0.0)
    return EncoderDecoderModel.from_checkpoint(
        assemble(None, AssemblyMode.RND2RND, cfg, seed=seed))


def random_src(rng, vocab_size=12, length=5):
    body = rng.integers(5, vocab_size, size=length - 2)
    return [BOS, *body.tolist(), EOS]


# -- scripted model for distribution-level tests -------------------------------
#
# decode_logits depends only on the last prefix token, via a fixed logit table,
# so the induced sequence distribution is a known tree.


class ScriptedModel:
    def __init__(self, table: dict[int, np.ndarray], vocab_size: int, max_positions=32):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.config = ModelConfig(vocab_size=vocab_size, d_model=8, n_heads=2,
                                  d_ff=16, n_enc_layers=1, n_dec_layers=1,
                                  max_positions=max_positions, dropout=0.0)
        self.vocab_size = vocab_size

    def eval(self):
        return self

    def encode(self, src_ids, src_pad_mask=None):
        b, l = np.asarray(src_ids).shape
        return T.Tensor(np.zeros((b, l, self.config.d_model)))

    def decode_logits(self, tgt_ids, memory, src_pad_mask):
        tgt_ids = np.asarray(tgt_ids)
        b, l = tgt_ids.shape
        out = np.zeros((b, l, self.vocab_size))
        for i in range(b):
            for t in range(l):
                out[i, t] = self.table[int(tgt_ids[i, t])]
        return T.Tensor(out)


def scripted_bimodal():
    """P(EOS | BOS) = 0.50, P(5 | BOS) = 0.498, P(EOS | 5) ~ 1."""
    v = 6
    bos_row = np.log(np.array([1e-12, 1e-3, 1e-12, 0.5, 1e-3, 0.498]))
    five_row = np.log(np.array([1e-12, 1e-9, 1e-12, 1.0 - 3e-9, 1e-9, 1e-9]))
    other = np.log(np.full(v, 1.0 / v))
    table = {i: other for i in range(v)}
    table[BOS] = bos_row
    table[5] = five_row
    return ScriptedModel(table, v)


def enumerate_decodable(model, src, max_len, alpha):
    """Brute-force argmax over every sequence the decoder could emit."""
    allowed = [i for i in range(model.config.vocab_size) if i not in BANNED_GENERATION_IDS]
    best = None
    stack = [(BOS,)]
    while stack:
        prefix = stack.pop()
        for tok in allowed:
            seq = prefix + (tok,)
            gen_len = len(seq) - 1
            if tok == EOS or gen_len == max_len:
                lp = sequence_logprob(model, src, list(seq))
                score = lp / length_penalty(gen_len, alpha)
                key = (-score, seq)
                if best is None or key < best[0]:
                    best = (key, seq)
            else:
                stack.append(seq)
    return best[1]


# -- greedy --------------------------------------------------------------------


def test_greedy_is_deterministic():
    model = random_model(0)
    src = random_src(np.random.default_rng(0))
    a = greedy_decode(model, src, max_len=8)
    b = greedy_decode(model, src, max_len=8)
    assert np.array_equal(a, b)


def test_greedy_max_len_one():
    model = random_model(1)
    out = greedy_decode(model, random_src(np.random.default_rng(1)), max_len=1)
    assert len(out) == 2 and out[0] == BOS


def test_greedy_output_structure():
    rng = np.random.default_rng(2)
    for seed in range(10):
        model = random_model(seed)
        out = greedy_decode(model, random_src(rng), max_len=6)
        assert out[0] == BOS
        assert PAD not in out
        assert out[-1] == EOS or len(out) == 7


def test_greedy_batch_matches_single():
    model = random_model(3)
    rng = np.random.default_rng(3)
    srcs = [random_src(rng, length=l) for l in (4, 5, 6)]
    batch = greedy_decode_batch(model, srcs, max_len=8)
    singles = [greedy_decode(model, s, max_len=8) for s in srcs]
    for b, s in zip(batch, singles):
        assert np.array_equal(b, s)


def test_greedy_rejects_overlong_max_len():
    model = random_model(4, max_positions=8)
    with pytest.raises(DataError):
        greedy_decode(model, [BOS, 6, EOS], max_len=8)


# -- beam search ----------------------------------------------------------------


def test_beam_one_alpha_zero_equals_greedy():
    rng = np.random.default_rng(5)
    for seed in range(20):
        model = random_model(seed)
        src = random_src(rng)
        greedy = greedy_decode(model, src, max_len=6)
        beam = beam_search(model, src, beam_size=1, max_len=6, length_penalty_alpha=0.0)
        assert np.array_equal(greedy, beam), f"seed {seed}"


def test_beam_matches_exhaustive_enumeration_scripted():
    rng = np.random.default_rng(6)
    for trial in range(5):
        v = 7
        table = {i: rng.normal(size=v) * 2.0 for i in range(v)}
        model = ScriptedModel(table, v)
        src = [BOS, EOS]
        expect = enumerate_decodable(model, src, max_len=3, alpha=1.0)
        got = beam_search(model, src, beam_size=5**3, max_len=3, length_penalty_alpha=1.0)
        assert tuple(got) == expect, f"trial {trial}"


def test_beam_matches_exhaustive_enumeration_real_model():
    model = random_model(9, vocab_size=7)
    src = [BOS, 5, 6, EOS]
    expect = enumerate_decodable(model, src, max_len=3, alpha=1.0)
    got = beam_search(model, src, beam_size=5**3, max_len=3, length_penalty_alpha=1.0)
    assert tuple(got) == expect


def test_length_penalty_changes_selected_length():
    model = scripted_bimodal()
    src = [BOS, EOS]
    short = beam_search(model, src, beam_size=2, max_len=4, length_penalty_alpha=0.0)
    long = beam_search(model, src, beam_size=2, max_len=4, length_penalty_alpha=1.0)
    assert len(short) != len(long)
    assert tuple(short) == (BOS, EOS)
    assert tuple(long) == (BOS, 5, EOS)


def test_widening_beam_never_lowers_returned_score():
    rng = np.random.default_rng(7)
    for trial in range(30):
        v = 8
        table = {i: rng.normal(size=v) * 3.0 for i in range(v)}
        model = ScriptedModel(table, v)
        src = [BOS, EOS]
        scores = []
        for k in (1, 2, 3, 5, 8):
            hyp = beam_search_hypothesis(model, src, k, max_len=5, length_penalty_alpha=1.0)
            scores.append(adjusted_score(hyp, 1.0))
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:])), f"trial {trial}"


def test_beam_output_structure():
    rng = np.random.default_rng(8)
    for seed in range(10):
        model = random_model(seed + 40)
        out = beam_search(model, random_src(rng), beam_size=3, max_len=5)
        assert out[0] == BOS
        assert PAD not in out
        assert BOS not in out[1:]
        assert out[-1] == EOS or len(out) == 6


def test_rescoring_reproduces_hypothesis_logprob():
    rng = np.random.default_rng(9)
    for seed in range(10):
        model = random_model(seed + 60)
        src = random_src(rng)
        hyp = beam_search_hypothesis(model, src, beam_size=4, max_len=6)
        rescored = sequence_logprob(model, src, list(hyp.ids))
        assert abs(rescored - hyp.logprob) < 1e-8


def test_beam_hypothesis_invariants():
    hyp = BeamHypothesis((BOS, 7, EOS), -1.5, True)
    assert hyp.generated_len() == 2
    assert adjusted_score(hyp, 0.0) == -1.5
    assert adjusted_score(hyp, 1.0) == pytest.approx(-1.5 / ((5 + 2) / 6))


def test_block_repeat_ngram_option():
    # a model that wants to loop on token 5 forever
    v = 7
    row = np.log(np.array([1e-12, 1e-3, 1e-12, 1e-3, 1e-3, 0.95, 0.04]))
    model = ScriptedModel({i: row for i in range(v)}, v)
    src = [BOS, EOS]
    unblocked = beam_search(model, src, beam_size=2, max_len=6, length_penalty_alpha=0.0)
    assert list(unblocked).count(5) > 1
    blocked = beam_search(model, src, beam_size=2, max_len=6,
                          length_penalty_alpha=0.0, block_repeat_ngram=1)
    generated = list(blocked[1:])
    assert len(generated) == len(set(generated)), blocked


def test_beam_validates_arguments():
    model = random_model(10)
    with pytest.raises(DataError):
        beam_search(model, [BOS, EOS], beam_size=0, max_len=4)
    with pytest.raises(DataError):
        beam_search(model, [BOS, EOS], beam_size=2, max_len=0)
