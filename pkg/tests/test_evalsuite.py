import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charlev import (Alphabet, AnchorSet, AttackConfig, CharEncoder,
                     RetrievalGallery, adversarial_accuracy, bleu,
                     clean_accuracy, cosine_sim, invert_embedding,
                     params_for_alphabet, recall_at_k, retrieval_attack,
                     synth_corpus, synth_topics, token_recall, word_recall,
                     zero_shot_predict)


def orthogonal_to(v, rng):
    w = rng.normal(size=v.shape)
    w -= (w @ v) / (v @ v) * v
    return w


class TestZeroShot:
    def test_own_embedding_wins(self, tiny_encoder):
        emb = tiny_encoder.encode("abc")
        rng = np.random.default_rng(0)
        anchors = AnchorSet(("self", "other"),
                            np.stack([emb, orthogonal_to(emb, rng)]))
        assert zero_shot_predict("abc", tiny_encoder, anchors) == 0

    def test_anchor_scale_invariance(self, tiny_encoder):
        emb = tiny_encoder.encode("abc")
        rng = np.random.default_rng(1)
        other = orthogonal_to(emb, rng)
        a1 = AnchorSet(("x", "y"), np.stack([emb, other]))
        a2 = AnchorSet(("x", "y"), np.stack([7.0 * emb, 0.2 * other]))
        for s in ("abc", "ji h", ""):
            if np.linalg.norm(tiny_encoder.encode(s)) == 0:
                continue
            assert zero_shot_predict(s, tiny_encoder, a1) == \
                zero_shot_predict(s, tiny_encoder, a2)

    def test_untrained_encoder_near_chance(self):
        # label-independent predictions land at 1/4 on a balanced corpus
        alphabet = Alphabet(tuple("abcdefghijklmnopqrstuvwxyz "))
        params = params_for_alphabet(alphabet, seed=41, d_e=16, m=256, d_h=32, h=32)
        enc = CharEncoder(params, alphabet)
        records = synth_corpus(classes=4, per_class=100, seed=11)
        rng = np.random.default_rng(5)
        anchors = AnchorSet(tuple("0123"), rng.normal(size=(4, enc.h)))
        dataset = [(r.text, r.label) for r in records]
        acc = clean_accuracy(dataset, enc, anchors)
        assert abs(acc - 0.25) < 0.08

    def test_requires_two_anchors(self):
        with pytest.raises(ValueError):
            AnchorSet(("one",), np.ones((1, 4)))


@pytest.fixture(scope="module")
def class_setup():
    alphabet = Alphabet(tuple("abcdefghijklmnopqrstuvwxyz "))
    params = params_for_alphabet(alphabet, seed=17, d_e=16, m=256, d_h=32, h=32)
    enc = CharEncoder(params, alphabet)
    records = synth_corpus(classes=3, per_class=20, seed=23)
    topics = synth_topics(3, seed=23)
    anchors = AnchorSet.from_texts(enc, [" ".join(t) for t in topics])
    dataset = [(r.text, r.label) for r in records]
    return alphabet, enc, dataset, anchors


class TestAdversarialAccuracy:
    def test_k0_equals_clean(self, class_setup):
        alphabet, enc, dataset, anchors = class_setup
        cfg = AttackConfig(k=0, rho=4, seed=3)
        adv = adversarial_accuracy(dataset, enc, anchors, "leaf", cfg, alphabet)
        assert adv == clean_accuracy(dataset, enc, anchors)

    def test_never_exceeds_clean(self, class_setup):
        alphabet, enc, dataset, anchors = class_setup
        cfg = AttackConfig(k=1, rho=6, seed=3)
        adv = adversarial_accuracy(dataset, enc, anchors, "leaf", cfg, alphabet)
        assert adv <= clean_accuracy(dataset, enc, anchors)

    def test_bruteforce_at_most_charmer(self, class_setup):
        alphabet, enc, dataset, anchors = class_setup
        subset = dataset[:12]
        cfg = AttackConfig(k=1, rho=6, seed=3, charmer_n=5)
        brute = adversarial_accuracy(subset, enc, anchors, "bruteforce", cfg, alphabet)
        charm = adversarial_accuracy(subset, enc, anchors, "charmer", cfg, alphabet)
        assert brute <= charm

    def test_unknown_attack(self, class_setup):
        alphabet, enc, dataset, anchors = class_setup
        with pytest.raises(ValueError):
            adversarial_accuracy(dataset, enc, anchors, "pgd",
                                 AttackConfig(k=1), alphabet)


class TestRecallAtK:
    def test_identity_gallery_perfect(self, tiny_encoder):
        queries = ["abc", "de f", "jih", "ab"]
        vecs = tiny_encoder.encode_batch(queries)
        gallery = RetrievalGallery(tuple(str(i) for i in range(4)), vecs,
                                   {i: str(i) for i in range(4)})
        assert recall_at_k(queries, tiny_encoder, gallery, 1) == 1.0

    def test_k_equal_gallery_size(self, tiny_encoder):
        rng = np.random.default_rng(2)
        queries = ["abc", "de f", "jih"]
        gallery = RetrievalGallery(("a", "b", "c"), rng.normal(size=(3, 12)),
                                   {0: "a", 1: "b", 2: "c"})
        assert recall_at_k(queries, tiny_encoder, gallery, 3) == 1.0

    def test_random_gallery_near_chance(self):
        rng = np.random.default_rng(11)
        n = 1000
        gallery = RetrievalGallery(tuple(map(str, range(n))),
                                   rng.normal(size=(n, 64)),
                                   {i: str(i) for i in range(50)})
        query_embs = rng.normal(size=(50, 64))

        class Passthrough:
            def encode_batch(self, sentences):
                return query_embs

        recall = recall_at_k(["q"] * 50, Passthrough(), gallery, 1)
        sigma = np.sqrt((1 / n) * (1 - 1 / n) / 50)
        assert recall <= 1 / n + 3 * sigma + 1e-12

    def test_nondecreasing_in_k(self, tiny_encoder):
        rng = np.random.default_rng(3)
        queries = ["abc", "de f", "jih", "a", "bb"]
        gallery = RetrievalGallery(tuple(map(str, range(8))),
                                   rng.normal(size=(8, 12)),
                                   {i: str(i) for i in range(5)})
        recalls = [recall_at_k(queries, tiny_encoder, gallery, k)
                   for k in range(1, 9)]
        assert all(a <= b for a, b in zip(recalls, recalls[1:]))

    def test_gallery_validation(self):
        with pytest.raises(ValueError):
            RetrievalGallery(("a", "a"), np.ones((2, 3)), {})
        with pytest.raises(ValueError):
            RetrievalGallery(("a",), np.ones((1, 3)), {0: "missing"})


class TestRetrievalAttack:
    def test_target_equals_query_keeps_similarity(self, tiny_encoder, tiny_alphabet):
        q = "abc de"
        cfg = AttackConfig(k=1, rho=5, seed=7)
        out = retrieval_attack(q, q, tiny_encoder, "leaf", cfg, tiny_alphabet)
        ref = tiny_encoder.encode(q)
        assert cosine_sim(tiny_encoder.encode(out), ref) >= \
            cosine_sim(tiny_encoder.encode(q), ref) - 1e-12

    def test_k0_identity(self, tiny_encoder, tiny_alphabet):
        cfg = AttackConfig(k=0, rho=5, seed=7)
        assert retrieval_attack("abc", "jih", tiny_encoder, "leaf", cfg,
                                tiny_alphabet) == "abc"


class TestInversion:
    def test_fixed_point_when_initialized_at_target(self, tiny_encoder, tiny_alphabet):
        target = tiny_encoder.encode("abc de")
        res = invert_embedding(target, tiny_encoder, tiny_alphabet, steps=10,
                               restarts=1, seed=4, init="abc de")
        assert res.sentence == "abc de"
        assert res.similarity == pytest.approx(1.0)

    def test_traces_nondecreasing(self, tiny_encoder, tiny_alphabet):
        target = tiny_encoder.encode("jihg")
        res = invert_embedding(target, tiny_encoder, tiny_alphabet, steps=30,
                               restarts=3, seed=9, length_cap=12)
        for trace in res.traces:
            assert all(a <= b for a, b in zip(trace, trace[1:]))

    def test_recovers_high_similarity_on_small_alphabet(self):
        alphabet = Alphabet(tuple("abcdefghijkl"))
        params = params_for_alphabet(alphabet, seed=29, d_e=12, m=128, d_h=24, h=8)
        enc = CharEncoder(params, alphabet)
        rng = np.random.default_rng(31)
        sims = []
        for _ in range(20):
            s = "".join(alphabet.chars[i] for i in rng.integers(0, 12, size=8))
            res = invert_embedding(enc.encode(s), enc, alphabet, steps=400,
                                   restarts=4, seed=int(rng.integers(1 << 30)),
                                   length_cap=16)
            sims.append(res.similarity)
        assert all(s >= 0.99 for s in sims)

    def test_subsampled_moves(self, tiny_encoder, tiny_alphabet):
        target = tiny_encoder.encode("abcd")
        res = invert_embedding(target, tiny_encoder, tiny_alphabet, steps=20,
                               restarts=2, seed=13, length_cap=8, sample_size=10)
        for trace in res.traces:
            assert all(a <= b for a, b in zip(trace, trace[1:]))


class TestReconstructionMetrics:
    def test_word_recall_identical(self):
        assert word_recall("a b c", "a b c") == 1.0

    def test_word_recall_disjoint(self):
        assert word_recall("a b", "x y") == 0.0

    def test_word_recall_partial(self):
        assert word_recall("a b c", "c a x") == pytest.approx(2 / 3)

    def test_word_recall_empty_reference(self):
        assert word_recall("", "anything") == 1.0

    def test_token_recall_identical(self):
        assert token_recall("abcdef", "abcdef") == 1.0

    def test_token_recall_short_reference(self):
        assert token_recall("ab", "zz") == 1.0  # no 3-grams to recover

    def test_token_recall_partial(self):
        # unique 3-grams of "abcd": abc, bcd; hypothesis has only abc
        assert token_recall("abcd", "abc") == pytest.approx(1 / 2)

    def test_bleu_identical(self):
        assert bleu("a b c d", "a b c d") == pytest.approx(1.0)

    def test_bleu_no_overlap_near_zero(self):
        assert bleu("a b c d", "x y z w") < 1e-6

    def test_bleu_hand_computed(self):
        # p1=1, p2=1, p3=1, p4 floored at 1e-9; BP = e^(1 - 4/3)
        expected = (1e-9) ** 0.25 * np.exp(1 - 4 / 3)
        assert bleu("a b c d", "a b c") == pytest.approx(expected)

    def test_bleu_empty_hypothesis(self):
        assert bleu("a b", "") == 0.0

    @given(st.text(alphabet="ab c", max_size=12), st.text(alphabet="ab c", max_size=12))
    def test_metric_bounds(self, ref, hyp):
        assert 0.0 <= word_recall(ref, hyp) <= 1.0
        assert 0.0 <= token_recall(ref, hyp) <= 1.0
        assert 0.0 <= bleu(ref, hyp) <= 1.0
