"""End-to-end acceptance checks, one test per criterion.

These are the release gates: analytic gradients against finite differences,
forward equations against brute-force recompositions, metrics against an
independent oracle, combinatorics against exhaustive DFS, a synthetic
learning experiment, an overfit check, byte-level determinism of the CLI
pipeline, and binary format round trips.
"""

import io
import math
import os
import time

import numpy as np
import pytest

from taxoenrich.cli import run
from taxoenrich.embeddings import (EmbeddingTable, load_table, write_table)
from taxoenrich.evaluator import (RankingResult, evaluate, mean_rank,
                                  precision_at_k, recall_at_k, scaled_mrr)
from taxoenrich.matcher import (PathCache, encode_child, encode_parent,
                                init_model, model_from_tensors,
                                score_backward, score_position,
                                select_siblings, sibling_attention)
from taxoenrich.nn import load_checkpoint, ntn_forward, save_checkpoint
from taxoenrich.taxonomy import (PSEUDO_LEAF, Position, Taxonomy,
                                 enumerate_candidate_positions, split_dataset)
from taxoenrich.trainer import (TrainConfig, example_loss, generate_examples,
                                train)

from oracles import (brute_force_metrics, brute_force_paths_down,
                      brute_force_paths_up, random_dag)


def _fixture_taxonomy():
    names = {x: x for x in "rabcdefghij"}
    edges = {("r", "a"), ("r", "b"), ("a", "c"), ("a", "d"), ("a", "e"),
             ("b", "f"), ("b", "g"), ("c", "h"), ("c", "i"), ("d", "j")}
    return Taxonomy(names, edges)


def _fixture_table(tax, dim, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim, {n: rng.standard_normal(dim).astype(np.float32)
                                for n in sorted(tax.nodes)})


# -- independent scalar oracles ------------------------------------------------

def _oracle_ntn(params, u, v):
    """h_k = u^T W_k v + V_k [u; v] + b_k, score = w . tanh(h), plain loops."""
    d_u, d_v, k = params.W.shape
    h = np.zeros(k)
    for kk in range(k):
        for i in range(d_u):
            for j in range(d_v):
                h[kk] += u[i] * params.W[i, j, kk] * v[j]
        for i in range(d_u):
            h[kk] += params.V[kk, i] * u[i]
        for j in range(d_v):
            h[kk] += params.V[kk, d_u + j] * v[j]
        h[kk] += params.b[kk]
    z = np.tanh(h)
    return float(params.w @ z), z


def _oracle_attention(model, e_q, g_p, g_c, sibs):
    phi = np.empty(len(sibs))
    for i in range(len(sibs)):
        feat = np.concatenate([g_p, g_c, sibs[i]])
        phi[i] = float(e_q @ model.w_sib @ feat)
    e = np.exp(phi - phi.max())
    alpha = e / e.sum()
    a = np.zeros(model.d)
    for i in range(len(sibs)):
        a += alpha[i] * sibs[i]
    return a, alpha


def _oracle_bce(logit, y):
    return math.log1p(math.exp(-abs(logit))) + max(logit, 0.0) - y * logit


def _oracle_score(model, e_q, tax, table, pos, t):
    """Straight-line recomposition of the five logits, eval-mode paths."""
    g_p, _ = encode_parent(model, table, tax, pos.parent, None)
    g_c, _ = encode_child(model, table, tax, pos.child, None)
    full = model.variant == "full"
    if full:
        sibs = select_siblings(tax, table, pos.parent, pos.child, t, None,
                               model.dtype)
        if len(sibs):
            a, _ = _oracle_attention(model, e_q, g_p, g_c, sibs)
        else:
            a = np.zeros(model.d)
        s3, z3 = _oracle_ntn(model.ntn3, e_q, a)
        v4 = np.concatenate([g_p, g_c, a])
    else:
        s3, z3 = 0.0, None
        v4 = np.concatenate([g_p, g_c])
    s1, z1 = _oracle_ntn(model.ntn1, e_q, g_p)
    s2, z2 = _oracle_ntn(model.ntn2, e_q, g_c)
    s4, z4 = _oracle_ntn(model.ntn4, e_q, v4)
    zcat = [z1, z2, z3, z4] if full else [z1, z2, z4]
    sp = float(model.u_p @ np.concatenate(zcat))
    return s1, s2, s3, s4, sp


class TestGradientSuite:
    def test_all_blocks_at_toy_dims(self):
        """Every parameter block: max rel error <= 1e-5, 64-bit, d=8 h=4 k=3,
        50 random draws, under 60 seconds (3 sampled coordinates per block
        and draw, central differences)."""
        t0 = time.perf_counter()
        tax = _fixture_taxonomy()
        table = _fixture_table(tax, 8)
        positions = [Position("a", "c"), Position("c", "h"),
                     Position("a", PSEUDO_LEAF), Position("b", "g"),
                     Position("d", "j")]
        eps = 1e-5
        worst = 0.0
        for draw in range(50):
            rng = np.random.default_rng(1000 + draw)
            variant = "full" if draw % 2 == 0 else "no-sibling"
            base = init_model(8, 4, 3, variant, seed=draw, dtype=np.float64)
            hyper = base.hyperparams()
            params = {n: a.copy() for n, a in base.param_dict().items()}
            e_q = rng.standard_normal(8)
            pos = positions[draw % len(positions)]
            weights = dict(zip(("s1", "s2", "s3", "s4", "sp"),
                               rng.standard_normal(5)))

            def loss_of(p):
                model = model_from_tensors(p, hyper)
                bundle, tape = score_position(model, e_q, tax, table, pos,
                                              t=5, rng=None)
                loss = sum(weights[n] * v for n, v in bundle.logits().items())
                return loss, tape, model

            loss0, tape, model = loss_of(params)
            analytic = score_backward(model, tape, weights)
            for name in sorted(params):
                arr = params[name]
                a_grad = analytic.get(name, np.zeros_like(arr))
                flat = arr.reshape(-1)
                idxs = rng.choice(flat.size, size=min(3, flat.size),
                                  replace=False)
                for idx in idxs:
                    orig = flat[idx]
                    flat[idx] = orig + eps
                    lp, _, _ = loss_of(params)
                    flat[idx] = orig - eps
                    lm, _, _ = loss_of(params)
                    flat[idx] = orig
                    numeric = (lp - lm) / (2 * eps)
                    a = float(np.asarray(a_grad).reshape(-1)[idx])
                    # the floor absorbs central-difference roundoff
                    # (~1e-11 at this eps and loss scale) on coordinates
                    # whose true gradient is essentially zero
                    denom = max(abs(a), abs(numeric), 1e-5)
                    worst = max(worst, abs(a - numeric) / denom)
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-5, f"max relative gradient error {worst}"
        assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"


class TestEquationOracles:
    TOL = 1e-9

    def test_ntn_forward_100_fixtures(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            d_u = int(rng.integers(1, 9))
            d_v = int(rng.integers(1, 9))
            k = int(rng.integers(1, 6))
            from taxoenrich.nn.ntn import init_ntn
            params_rng = np.random.default_rng(int(rng.integers(10000)))
            params = init_ntn(d_u, d_v, k, params_rng, np.float64)
            u = rng.standard_normal(d_u)
            v = rng.standard_normal(d_v)
            score, z, _ = ntn_forward(params, u, v)
            o_score, o_z = _oracle_ntn(params, u, v)
            assert abs(score - o_score) < self.TOL
            np.testing.assert_allclose(z, o_z, atol=self.TOL)

    def test_sibling_attention_100_fixtures(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            h = int(rng.integers(1, 5))
            model = init_model(d, h, 2, seed=int(rng.integers(1000))
                               ).astype(np.float64)
            n_sib = int(rng.integers(1, 7))
            e_q = rng.standard_normal(d)
            g_p = rng.standard_normal(d + h)
            g_c = rng.standard_normal(d + h)
            sibs = rng.standard_normal((n_sib, d))
            a, alpha, _ = sibling_attention(model, e_q, g_p, g_c, sibs)
            o_a, o_alpha = _oracle_attention(model, e_q, g_p, g_c, sibs)
            np.testing.assert_allclose(alpha, o_alpha, atol=self.TOL)
            np.testing.assert_allclose(a, o_a, atol=self.TOL)

    def test_score_position_100_fixtures(self):
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 100:
            tax = random_dag(rng, int(rng.integers(3, 11)), 0.3)
            dim = int(rng.integers(3, 7))
            table = _fixture_table(tax, dim, seed=int(rng.integers(1000)))
            variant = "full" if checked % 2 == 0 else "no-sibling"
            model = init_model(dim, 3, 2, variant,
                               seed=int(rng.integers(1000))
                               ).astype(np.float64)
            e_q = rng.standard_normal(dim)
            candidates = enumerate_candidate_positions(tax)
            pos = candidates[int(rng.integers(len(candidates)))]
            bundle, _ = score_position(model, e_q, tax, table, pos, t=5,
                                       rng=None)
            oracle = _oracle_score(model, e_q, tax, table, pos, 5)
            for got, want in zip((bundle.s1, bundle.s2, bundle.s3, bundle.s4,
                                  bundle.sp), oracle):
                assert abs(got - want) < self.TOL
            checked += 1

    def test_example_loss_100_fixtures(self):
        tax = _fixture_taxonomy()
        table = _fixture_table(tax, 6)
        rng = np.random.default_rng(5)
        cfg = TrainConfig(k=2, h=3, t_train=5, dtype="float64")
        queries = sorted(n for n in tax.nodes if tax.parents(n))
        for trial in range(100):
            variant = "full" if trial % 2 == 0 else "no-sibling"
            cfg.variant = variant
            model = init_model(6, 3, 2, variant,
                               seed=int(rng.integers(1000))
                               ).astype(np.float64)
            q = queries[int(rng.integers(len(queries)))]
            examples = generate_examples(tax, q, 5,
                                         np.random.default_rng(trial))
            ex = examples[int(rng.integers(len(examples)))]
            total, _, terms = example_loss(model, table, tax, ex, cfg,
                                           rng=None)
            e_q = table.lookup(q, np.float64)
            s1, s2, s3, s4, sp = _oracle_score(model, e_q, tax, table,
                                               ex.position, cfg.t_train)
            y1, y2, y3, y4, yp = ex.labels
            l1, l2, l3, l4 = cfg.lambdas
            expect = _oracle_bce(sp, yp) + l1 * _oracle_bce(s1, y1) \
                + l2 * _oracle_bce(s2, y2) + l4 * _oracle_bce(s4, y4)
            if variant == "full":
                expect += l3 * _oracle_bce(s3, y3)
            assert abs(total - expect) < self.TOL
            assert abs(terms["sp"] - _oracle_bce(sp, yp)) < self.TOL


class TestMetricOracles:
    def test_1000_randomized_fixtures(self):
        rng = np.random.default_rng(6)
        ks = (1, 5, 10)
        for _ in range(1000):
            n_q = int(rng.integers(1, 6))
            per_query = [sorted(set(
                rng.integers(1, 80, size=int(rng.integers(1, 5))).tolist()))
                for _ in range(n_q)]
            results = [RankingResult(f"q{i}", [], ranks)
                       for i, ranks in enumerate(per_query)]
            mr, mrr, recall, precision = brute_force_metrics(per_query, ks)
            assert abs(mean_rank(results) - mr) < 1e-12
            assert abs(scaled_mrr(results) - mrr) < 1e-12
            for k in ks:
                assert abs(recall_at_k(results, k) - recall[k]) < 1e-12
                assert abs(precision_at_k(results, k) - precision[k]) < 1e-12

    def test_hand_examples_hold_verbatim(self):
        def res(*ranks_per_query):
            return [RankingResult(f"q{i}", [], sorted(r))
                    for i, r in enumerate(ranks_per_query)]

        assert mean_rank(res([1, 4])) == 2.5
        assert mean_rank(res([2], [4, 6])) == 4.0
        assert scaled_mrr(res([15])) == 0.5
        assert abs(scaled_mrr(res([1, 25])) - (1 + 1 / 3) / 2) < 1e-15
        assert recall_at_k(res([1, 4], [12]), 10) == 2 / 3
        assert precision_at_k(res([1, 4], [12]), 10) == 0.1


class TestCombinatorics:
    def test_200_random_dags(self):
        rng = np.random.default_rng(7)
        for trial in range(200):
            tax = random_dag(rng, int(rng.integers(1, 13)),
                             float(rng.uniform(0.1, 0.6)))
            comp = set(enumerate_candidate_positions(tax, "completion"))
            exp = set(enumerate_candidate_positions(tax, "expansion"))
            want_exp = {Position(n, PSEUDO_LEAF) for n in tax.nodes}
            want_comp = want_exp | {Position(p, c) for p, c in tax.edges}
            assert comp == want_comp
            assert exp == want_exp
            from taxoenrich.sentences import ancestral_paths, descendant_paths
            for v in tax.nodes:
                up = {p.nodes for p in ancestral_paths(tax, v, None)}
                down = {p.nodes for p in descendant_paths(tax, v, None)}
                assert up == brute_force_paths_up(tax, v)
                assert down == brute_force_paths_down(tax, v)


def _balanced_taxonomy(branching=5, levels=3):
    names = {"n": "root"}
    edges = set()
    frontier = ["n"]
    for _ in range(levels):
        nxt = []
        for parent in frontier:
            for i in range(branching):
                child = f"{parent}{i}"
                names[child] = child
                edges.add((parent, child))
                nxt.append(child)
        frontier = nxt
    return Taxonomy(names, edges)


def _cluster_embeddings(tax, dim=64, noise=0.35, seed=0):
    """Each node's vector is its parent's plus Gaussian noise, normalized,
    so the embedding space mirrors the tree's cluster structure."""
    rng = np.random.default_rng(seed)
    rows = {}
    for node in sorted(tax.nodes, key=lambda n: (len(n), n)):
        parents = sorted(tax.parents(node))
        if not parents:
            vec = rng.standard_normal(dim)
        else:
            vec = (rows[parents[0]].astype(np.float64)
                   + noise * rng.standard_normal(dim))
        rows[node] = (vec / np.linalg.norm(vec)).astype(np.float32)
    return EmbeddingTable(dim, rows)


@pytest.fixture(scope="module")
def problem():
    tax = _balanced_taxonomy()
    assert len(tax) == 156
    table = _cluster_embeddings(tax)
    seed_tax, val, test = split_dataset(tax, 10, 20, seed=1)
    assert len(test) == 20
    return tax, table, seed_tax, val, test


class TestLearningCheck:
    """156-node balanced taxonomy, cluster-structured embeddings, 20 held-out
    test queries, d=64 h=32 k=5: test MR <= 0.25 * random MR and
    Recall@10 >= 0.5 within 200 epochs and 5 minutes per variant."""

    def _run(self, problem, variant):
        tax, table, seed_tax, val, test = problem
        cfg = TrainConfig(lr=0.005, max_epochs=5, negatives=15, batch_size=16,
                          k=5, h=32, variant=variant, seed=0, t_train=5,
                          t_eval=20, scheduler_patience=5,
                          early_stop_patience=5)
        assert cfg.max_epochs <= 200
        t0 = time.perf_counter()
        model, log = train(seed_tax, table, val, cfg)
        elapsed = time.perf_counter() - t0
        report = evaluate(model, test, seed_tax, table, ks=(10,),
                          t_eval=cfg.t_eval, seed=cfg.seed)
        n_cand = len(enumerate_candidate_positions(seed_tax))
        random_mr = (n_cand + 1) / 2
        assert report.mr <= 0.25 * random_mr, (
            f"{variant}: MR {report.mr:.2f} > {0.25 * random_mr:.2f}")
        assert report.recall_at[10] >= 0.5, (
            f"{variant}: Recall@10 {report.recall_at[10]:.3f} < 0.5")
        assert elapsed <= 300.0, f"{variant}: training took {elapsed:.0f}s"
        return model

    def test_full_variant_learns(self, problem):
        self._run(problem, "full")

    def test_no_sibling_variant_learns(self, problem):
        model = self._run(problem, "no-sibling")
        # without the sibling branch, the sibling-sampling seed must not
        # influence a single bit of the metrics
        tax, table, seed_tax, val, test = problem
        a = evaluate(model, test, seed_tax, table, ks=(1, 5, 10), seed=0)
        b = evaluate(model, test, seed_tax, table, ks=(1, 5, 10), seed=98765)
        assert a == b


class TestOverfitCheck:
    def test_mean_loss_after_500_steps(self):
        """Mean training loss <= 0.05 after 500 full-batch Adam steps on a
        fixed 50-example set."""
        from taxoenrich.nn.adam import AdamState, adam_step

        tax = _fixture_taxonomy()
        table = _fixture_table(tax, 8)
        examples = []
        for q in sorted(n for n in tax.nodes if tax.parents(n)):
            examples.extend(generate_examples(tax, q, 6,
                                              np.random.default_rng(1)))
        examples = examples[:50]
        assert len(examples) == 50
        cfg = TrainConfig(lr=0.02, k=5, h=8, t_train=5, dtype="float64")
        model = init_model(8, 8, 5, "full", seed=0, dtype=np.float64)
        params = model.param_dict()
        adam = AdamState(lr=cfg.lr)
        trainable = set(model.trainable_names())
        cache = PathCache(tax)
        mean_loss = float("inf")
        for _ in range(500):
            acc = {}
            total = 0.0
            for ex in examples:
                loss, grads, _ = example_loss(model, table, tax, ex, cfg,
                                              None, cache)
                total += loss
                for name, g in grads.items():
                    acc[name] = acc.get(name, 0) + g / len(examples)
            acc = {n: np.asarray(g) for n, g in acc.items() if n in trainable}
            adam_step(adam, params, acc)
            mean_loss = total / len(examples)
        assert mean_loss <= 0.05, f"mean loss {mean_loss:.4f} > 0.05"


class TestDeterminism:
    CONFIG = """\
[paths]
terms = {d}/taxo.terms
edges = {d}/taxo.edges
sentences = {d}/sentences.tsv
embeddings = {d}/nodes.txe
checkpoint = {d}/model.txm
report = {d}/report.tsv
split_dir = {d}/split

[run]
seed = 3
dim = 16

[train]
max_epochs = 3
batch_size = 4
negatives = 4
t_train = 2
h = 4
k = 2
"""

    def _pipeline(self, d):
        tax = _fixture_taxonomy()
        with open(os.path.join(d, "taxo.terms"), "w") as fh:
            for n in sorted(tax.nodes):
                fh.write(f"{n}\t{n}\n")
        with open(os.path.join(d, "taxo.edges"), "w") as fh:
            for p, c in sorted(tax.edges):
                fh.write(f"{p}\t{c}\n")
        config = os.path.join(d, "run.ini")
        with open(config, "w") as fh:
            fh.write(self.CONFIG.format(d=d))
        for cmd in (["sentences"], ["embed-fallback"],
                    ["split", "--n-val", "1", "--n-test", "2"], ["train"],
                    ["eval"]):
            assert run(cmd + ["-c", config]) == 0
        with open(os.path.join(d, "model.txm"), "rb") as fh:
            checkpoint = fh.read()
        with open(os.path.join(d, "report.tsv"), "rb") as fh:
            report = fh.read()
        return checkpoint, report

    def test_bit_identical_checkpoint_and_report(self, tmp_path, capsys):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        ckpt_a, report_a = self._pipeline(str(a))
        ckpt_b, report_b = self._pipeline(str(b))
        assert ckpt_a == ckpt_b
        assert report_a == report_b
        assert len(ckpt_a) > 0 and len(report_a) > 0


class TestFormatRoundTrips:
    def test_embedding_table_100_instances(self):
        rng = np.random.default_rng(8)
        for trial in range(100):
            dim = int(rng.integers(1, 65))
            n = int(rng.integers(0, 20))
            rows = {f"node/{trial}/{i}": rng.standard_normal(dim)
                    .astype(np.float32) for i in range(n)}
            buf = io.BytesIO()
            write_table(EmbeddingTable(dim, rows), buf)
            buf.seek(0)
            back = load_table(buf)
            assert back.dim == dim and len(back) == n
            for node, vec in rows.items():
                np.testing.assert_array_equal(back.rows[node], vec)

    def test_checkpoint_100_instances(self):
        rng = np.random.default_rng(9)
        for trial in range(100):
            tensors = {}
            for i in range(int(rng.integers(0, 8))):
                ndim = int(rng.integers(0, 4))
                shape = tuple(int(rng.integers(1, 6)) for _ in range(ndim))
                dtype = np.float32 if rng.random() < 0.5 else np.float64
                tensors[f"t{i}"] = rng.standard_normal(shape).astype(dtype)
            hyper = {"trial": trial, "tag": f"x{trial}"}
            buf = io.BytesIO()
            save_checkpoint(buf, tensors, hyper)
            buf.seek(0)
            back, h = load_checkpoint(buf)
            assert h == hyper and set(back) == set(tensors)
            for name, arr in tensors.items():
                assert back[name].dtype == arr.dtype
                np.testing.assert_array_equal(back[name], arr)
