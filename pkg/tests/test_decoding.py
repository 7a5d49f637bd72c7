import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_model
from s2sa.corpus import BOS, EOS
from s2sa.decoding import (
    BeamConfig, HardToBos, Hypothesis, PositionalHard, RandomHard, SelfAttnMax, SelfAttnMin, StandardSoft,
    beam_search, inspect_selection, mmi_rerank, parse_strategy, reverse_log_prob, search, select_first_context,
    self_attention_scores,
)
from s2sa.errors import ConfigError, InvalidInputError
from s2sa.model import EncoderStates, RecurrentState, attention, decoder_step, encode
from s2sa.numeric import SeededRng, log_softmax

ALL = [StandardSoft(), HardToBos(), PositionalHard(1), PositionalHard(3), RandomHard(4), SelfAttnMax(), SelfAttnMin()]
HARD = ALL[1:]


def enc_of(H):
    H = np.asarray(H, dtype=float)
    return EncoderStates(H, np.zeros(H.shape[1]))


def h0_of(dim, rng=None):
    h = np.zeros(dim) if rng is None else rng.normal(size=dim)
    return RecurrentState(h, np.zeros(dim))


class TestParse:
    @pytest.mark.parametrize("s", ALL)
    def test_roundtrip(self, s):
        assert parse_strategy(s.name) == s

    @pytest.mark.parametrize("bad", ["", "soft", "positional:", "positional:0", "positional:x", "random:y"])
    def test_rejects(self, bad):
        with pytest.raises((ConfigError, InvalidInputError)):
            parse_strategy(bad)


class TestSelectFirstContext:
    H3 = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]

    def test_selfattn_max_tie_lowest_index(self):
        sel = select_first_context(SelfAttnMax(), enc_of(self.H3), h0_of(2))
        np.testing.assert_array_equal(self_attention_scores(np.array(self.H3)), [2.0, 2.0, 1.0])
        assert sel.index == 1 and list(sel.context) == [1.0, 0.0]

    def test_selfattn_min(self):
        sel = select_first_context(SelfAttnMin(), enc_of(self.H3), h0_of(2))
        assert sel.index == 3 and list(sel.context) == [0.0, 1.0]

    def test_positional_first(self, np_rng):
        H = np_rng.normal(size=(5, 3))
        sel = select_first_context(PositionalHard(1), enc_of(H), h0_of(3))
        assert sel.index == 1 and sel.context.tobytes() == H[0].tobytes() and not sel.clamped

    def test_positional_clamps(self, np_rng):
        H = np_rng.normal(size=(3, 2))
        sel = select_first_context(PositionalHard(5), enc_of(H), h0_of(2))
        assert sel.index == 3 and sel.clamped and sel.context.tobytes() == H[2].tobytes()

    @pytest.mark.parametrize("s", ALL)
    def test_single_source_every_strategy(self, s, np_rng):
        H = np_rng.normal(size=(1, 4))
        sel = select_first_context(s, enc_of(H), h0_of(4, np_rng))
        np.testing.assert_array_equal(sel.context, H[0])

    def test_hard_to_bos_uses_attention_argmax(self, np_rng):
        H = np_rng.normal(size=(6, 3))
        h0 = h0_of(3, np_rng)
        alphas, _ = attention(h0.h, enc_of(H))
        sel = select_first_context(HardToBos(), enc_of(H), h0)
        assert sel.index == int(np.argmax(alphas)) + 1
        np.testing.assert_array_equal(sel.alphas, alphas)

    def test_standard_soft_is_attention(self, np_rng):
        H = np_rng.normal(size=(4, 3))
        h0 = h0_of(3, np_rng)
        sel = select_first_context(StandardSoft(), enc_of(H), h0)
        np.testing.assert_array_equal(sel.context, attention(h0.h, enc_of(H))[1])
        assert sel.index is None

    def test_random_hard_seeded(self, np_rng):
        H = np_rng.normal(size=(7, 2))
        picks = {select_first_context(RandomHard(), enc_of(H), h0_of(2), SeededRng(s)).index for s in range(60)}
        assert picks == set(range(1, 8))
        a = select_first_context(RandomHard(), enc_of(H), h0_of(2), SeededRng(3))
        b = select_first_context(RandomHard(), enc_of(H), h0_of(2), SeededRng(3))
        assert a.index == b.index

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            select_first_context(SelfAttnMax(), EncoderStates(np.zeros((0, 2)), np.zeros(2)), h0_of(2))

    @settings(max_examples=100)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 100_000), st.sampled_from(HARD))
    def test_hard_membership(self, n, d, seed, strategy):
        rng = np.random.default_rng(seed)
        H = rng.normal(size=(n, d))
        sel = select_first_context(strategy, enc_of(H), h0_of(d, rng), SeededRng(seed))
        assert 1 <= sel.index <= n
        assert sel.context.tobytes() == H[sel.index - 1].tobytes()

    @settings(max_examples=100)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 100_000))
    def test_against_bruteforce(self, n, d, seed):
        rng = np.random.default_rng(seed)
        H = rng.normal(size=(n, d))
        for strategy, pick in ((SelfAttnMax(), "max"), (SelfAttnMin(), "min")):
            sel = select_first_context(strategy, enc_of(H), h0_of(d))
            assert sel.index - 1 == oracles.self_attention_index_exact(H, pick)


def greedy(m, msg, max_len, first_context):
    enc = encode(m, msg)
    state = enc.final_state
    out, total, prev = [], 0.0, BOS
    for t in range(max_len):
        a = first_context if t == 0 else attention(state.h, enc)[1]
        state, logits = decoder_step(m, prev, state, a)
        lp = log_softmax(logits)
        w = int(np.argmax(lp))
        out.append(w)
        total += lp[w]
        prev = w
        if w == EOS:
            break
    return tuple(out), total


class TestBeamSearch:
    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("strategy", [StandardSoft(), SelfAttnMax(), PositionalHard(2)])
    def test_width_one_is_greedy(self, seed, strategy):
        m = random_model(8, 3, 4, seed=seed, scale=1.0)
        msg = [4, 5, 6, 7]
        enc = encode(m, msg)
        a1 = select_first_context(strategy, enc, enc.final_state).context
        (best,) = beam_search(m, msg, strategy, BeamConfig(beam_width=1, max_len=6))
        toks, total = greedy(m, msg, 6, a1)
        assert best.token_ids == toks
        assert best.log_prob == pytest.approx(total, abs=1e-12)

    def test_max_len_one(self):
        hyps = beam_search(random_model(7, 2, 3), [4, 5], StandardSoft(), BeamConfig(beam_width=4, max_len=1))
        assert len(hyps) == 4 and all(len(h.token_ids) == 1 and h.finished for h in hyps)

    @pytest.mark.parametrize("seed", range(4))
    def test_exhaustive_enumeration(self, seed):
        m = random_model(5, 2, 3, seed=seed, scale=1.5)
        msg = [3, 4, 0]
        enc = encode(m, msg)
        for strategy in (StandardSoft(), SelfAttnMin()):
            a1 = select_first_context(strategy, enc, enc.final_state).context
            hyps = beam_search(m, msg, strategy, BeamConfig(beam_width=25, max_len=2))
            brute = sorted(
                ((oracles.hypothesis_log_prob(m.tensors(), msg, seq, list(a1)), seq) for seq in oracles.enumerate_outputs(5, 2)),
                key=lambda t: (-t[0], len(t[1]), t[1]),
            )
            assert [h.token_ids for h in hyps] == [s for _, s in brute]
            np.testing.assert_allclose([h.log_prob for h in hyps], [s for s, _ in brute], atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6), st.sampled_from(ALL))
    def test_scores_and_invariants(self, seed, width, strategy):
        m = random_model(9, 3, 3, seed=seed, scale=1.0)
        msg = [4, 5, 6]
        hyps = beam_search(m, msg, strategy, BeamConfig(beam_width=width, max_len=5))
        assert 1 <= len(hyps) <= width
        enc = encode(m, msg)
        a1 = select_first_context(strategy, enc, enc.final_state, SeededRng((strategy.seed, len(msg), *msg)) if isinstance(strategy, RandomHard) else None).context
        for h in hyps:
            assert h.finished and h.log_prob <= 0
            assert (h.token_ids[-1] == EOS) or len(h.token_ids) == 5
            assert EOS not in h.token_ids[:-1]
            assert h.log_prob == pytest.approx(sum(h.step_log_probs), abs=1e-9)
            assert h.log_prob == pytest.approx(oracles.hypothesis_log_prob(m.tensors(), msg, h.token_ids, list(a1)), abs=1e-9)
        keys = [(-h.log_prob, h.finish_step, h.token_ids) for h in hyps]
        assert keys == sorted(keys)

    @pytest.mark.parametrize("seed", range(5))
    def test_prefixes_survived(self, seed):
        m = random_model(10, 3, 3, seed=seed, scale=1.0)
        trace = []
        search(m, [4, 5, 6], StandardSoft(), BeamConfig(beam_width=3, max_len=6), trace)
        for t in range(1, len(trace)):
            alive_before = {tok for tok in trace[t - 1] if tok[-1] != EOS}
            for tok in trace[t]:
                assert tok[:-1] in alive_before

    def test_length_normalize_ranks_by_mean(self):
        m = random_model(9, 3, 3, seed=2, scale=1.5)
        hyps = beam_search(m, [4, 5], StandardSoft(), BeamConfig(beam_width=5, max_len=4, length_normalize=True))
        scores = [h.log_prob / len(h.token_ids) for h in hyps]
        assert scores == sorted(scores, reverse=True)

    def test_empty_message(self):
        with pytest.raises(InvalidInputError):
            beam_search(random_model(7, 2, 2), [], StandardSoft())

    def test_random_hard_is_per_message(self):
        m = random_model(9, 3, 3, seed=1)
        _, s1 = search(m, [4, 5, 6, 7, 8], RandomHard(11), BeamConfig(beam_width=2, max_len=3))
        search(m, [5, 5], RandomHard(11), BeamConfig(beam_width=2, max_len=3))
        _, s2 = search(m, [4, 5, 6, 7, 8], RandomHard(11), BeamConfig(beam_width=2, max_len=3))
        assert s1.index == s2.index


def candidates(seed, width=5):
    m = random_model(9, 3, 3, seed=seed, scale=1.0)
    return m, beam_search(m, [4, 5, 6], StandardSoft(), BeamConfig(beam_width=width, max_len=4))


class TestMMI:
    def test_lambda_zero_identity(self):
        _, hyps = candidates(1)
        rev = random_model(9, 3, 3, seed=100)
        out = mmi_rerank(hyps, rev, [4, 5, 6], 0.0)
        assert [h.token_ids for h in out] == [h.token_ids for h in hyps]

    def test_single_candidate(self):
        _, hyps = candidates(2)
        out = mmi_rerank(hyps[:1], random_model(9, 3, 3, seed=5), [4, 5, 6], 1.0)
        assert len(out) == 1 and out[0].token_ids == hyps[0].token_ids and out[0].log_prob == hyps[0].log_prob

    def test_hand_summed_order(self):
        _, hyps = candidates(3, width=3)
        rev = random_model(9, 3, 3, seed=7, scale=1.5)
        t = rev.tensors()
        expected = []
        for h in hyps:
            src = [w for w in h.token_ids if w != EOS] or [EOS]
            expected.append((h.log_prob + oracles.sequence_log_prob(t, src, [4, 5, 6]), h.token_ids))
        out = mmi_rerank(hyps, rev, [4, 5, 6], 1.0)
        want = [tok for _, tok in sorted(expected, key=lambda e: -e[0])]
        assert [h.token_ids for h in out] == want
        for h in out:
            assert h.mmi_score == pytest.approx(dict((tok, s) for s, tok in expected)[h.token_ids], abs=1e-9)

    def test_is_permutation(self):
        _, hyps = candidates(4, width=6)
        out = mmi_rerank(hyps, random_model(9, 3, 3, seed=9), [4, 5, 6], 2.5)
        assert sorted(h.token_ids for h in out) == sorted(h.token_ids for h in hyps)

    def test_empty_candidate_scored_from_eos(self):
        rev = random_model(9, 3, 3, seed=9)
        assert reverse_log_prob(rev, [], [4, 5]) == pytest.approx(oracles.sequence_log_prob(rev.tensors(), [EOS], [4, 5]), abs=1e-12)

    def test_vocab_mismatch(self):
        _, hyps = candidates(5)
        with pytest.raises(ConfigError):
            mmi_rerank(hyps, random_model(6, 3, 3), [4, 5, 6], 1.0)

    def test_no_candidates(self):
        with pytest.raises(InvalidInputError):
            mmi_rerank([], random_model(9, 3, 3), [4], 1.0)


class TestInspectSelection:
    def test_positional_rows(self):
        m = random_model(12, 3, 3, seed=1)
        rows = inspect_selection(m, [4, 5, 6, 7, 8, 9], [PositionalHard(1), PositionalHard(5)], BeamConfig(beam_width=3, max_len=5))
        assert [r.selected_index for r in rows] == [1, 5]

    def test_selfattn_row_consistent(self):
        m = random_model(12, 3, 3, seed=2)
        msg = [4, 5, 6, 7]
        (row,) = inspect_selection(m, msg, [SelfAttnMax()], BeamConfig(beam_width=3, max_len=5))
        enc = encode(m, msg)
        assert row.selected_index == select_first_context(SelfAttnMax(), enc, enc.final_state).index

    def test_deterministic_and_clamp_flag(self):
        m = random_model(12, 3, 3, seed=3)
        strategies = [PositionalHard(9), RandomHard(2), StandardSoft()]
        a = inspect_selection(m, [4, 5], strategies, BeamConfig(beam_width=2, max_len=4))
        b = inspect_selection(m, [4, 5], strategies, BeamConfig(beam_width=2, max_len=4))
        assert [(r.selected_index, r.response_ids) for r in a] == [(r.selected_index, r.response_ids) for r in b]
        assert a[0].index_text() == "2*" and a[2].index_text() == "-"
