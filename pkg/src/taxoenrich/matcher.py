"""The completion model: sequential position encoders, query-aware sibling
attention, four auxiliary NTN scorers and the primal scorer.

Representations:
  g(p) = x_p (+) LSTM over a sampled ancestral path, root first
  g(c) = x_c (+) LSTM over a sampled descendant path, child-to-leaf order
  a(p) = attention-weighted sum of candidate sibling embeddings
Scores:
  s1 = NTN1(e_q, g(p));  s2 = NTN2(e_q, g(c));  s3 = NTN3(e_q, a(p))
  s4 = NTN4(e_q, [g(p); g(c); a(p)])
  sp = u_p . tanh([h1; h2; h3; h4])  over the NTNs' pre-output activations

The "no-sibling" variant drops a(p) everywhere: s3 is pinned to 0, s4 sees
only [g(p); g(c)], and u_p spans three activation blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingTable
from .nn.lstm import LstmParams, init_lstm, lstm_backward, lstm_forward
from .nn.ntn import NtnParams, init_ntn, ntn_backward, ntn_forward
from .nn.ops import softmax, uniform_init
from .sentences import DEFAULT_MAX_PATHS, TaxoPath, ancestral_paths, descendant_paths
from .taxonomy import PSEUDO_LEAF, PSEUDO_ROOT, Position, PseudoNode, Taxonomy

VARIANTS = ("full", "no-sibling")


@dataclass
class ModelParams:
    """Every learnable parameter of the matching model."""

    d: int
    h: int
    k: int
    variant: str
    lstm_parent: LstmParams
    lstm_child: LstmParams
    w_sib: np.ndarray         # (d, 2*(d+h) + d)
    ntn1: NtnParams
    ntn2: NtnParams
    ntn3: NtnParams
    ntn4: NtnParams
    u_p: np.ndarray           # (4k,) full | (3k,) no-sibling
    pseudo_leaf: np.ndarray   # (d,) trainable placeholder rows
    pseudo_root: np.ndarray

    @property
    def g_dim(self) -> int:
        return self.d + self.h

    @property
    def dtype(self):
        return self.u_p.dtype

    def param_dict(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.lstm_parent.named("lstm_p"))
        out.update(self.lstm_child.named("lstm_c"))
        out["w_sib"] = self.w_sib
        for i, ntn in enumerate((self.ntn1, self.ntn2, self.ntn3, self.ntn4), 1):
            out.update(ntn.named(f"ntn{i}"))
        out["u_p"] = self.u_p
        out["pseudo_leaf"] = self.pseudo_leaf
        out["pseudo_root"] = self.pseudo_root
        return out

    def trainable_names(self) -> list[str]:
        names = list(self.param_dict())
        if self.variant == "no-sibling":
            names = [n for n in names
                     if not (n.startswith("ntn3.") or n == "w_sib")]
        return names

    def hyperparams(self) -> dict:
        return {"d": self.d, "h": self.h, "k": self.k, "variant": self.variant,
                "dtype": np.dtype(self.dtype).name}

    def copy(self) -> "ModelParams":
        params = {n: a.copy() for n, a in self.param_dict().items()}
        return model_from_tensors(params, self.hyperparams())

    def astype(self, dtype) -> "ModelParams":
        hyper = self.hyperparams()
        hyper["dtype"] = np.dtype(dtype).name
        params = {n: a.astype(dtype) for n, a in self.param_dict().items()}
        return model_from_tensors(params, hyper)


@dataclass
class ScoreBundle:
    s1: float
    s2: float
    s3: float
    s4: float
    sp: float
    alpha: np.ndarray = field(default_factory=lambda: np.empty(0))

    def logits(self) -> dict[str, float]:
        return {"s1": self.s1, "s2": self.s2, "s3": self.s3, "s4": self.s4,
                "sp": self.sp}


def init_model(d: int, h: int, k: int, variant: str = "full", seed: int = 0,
               dtype=np.float32) -> ModelParams:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)
    g = d + h
    s4_dim = 2 * g + d if variant == "full" else 2 * g
    blocks = 4 if variant == "full" else 3
    return ModelParams(
        d=d, h=h, k=k, variant=variant,
        lstm_parent=init_lstm(d, h, rng, dtype),
        lstm_child=init_lstm(d, h, rng, dtype),
        w_sib=uniform_init(rng, (d, 2 * g + d), 2 * g + d, dtype),
        ntn1=init_ntn(d, g, k, rng, dtype),
        ntn2=init_ntn(d, g, k, rng, dtype),
        ntn3=init_ntn(d, d, k, rng, dtype),
        ntn4=init_ntn(d, s4_dim, k, rng, dtype),
        u_p=uniform_init(rng, (blocks * k,), blocks * k, dtype),
        pseudo_leaf=np.zeros(d, dtype=dtype),
        pseudo_root=np.zeros(d, dtype=dtype),
    )


def model_from_tensors(tensors: dict[str, np.ndarray], hyper: dict) -> ModelParams:
    def lstm(prefix):
        return LstmParams(tensors[f"{prefix}.Wx"], tensors[f"{prefix}.Wh"],
                          tensors[f"{prefix}.b"])

    def ntn(prefix):
        return NtnParams(tensors[f"{prefix}.W"], tensors[f"{prefix}.V"],
                         tensors[f"{prefix}.b"], tensors[f"{prefix}.w"])

    return ModelParams(
        d=int(hyper["d"]), h=int(hyper["h"]), k=int(hyper["k"]),
        variant=hyper["variant"],
        lstm_parent=lstm("lstm_p"), lstm_child=lstm("lstm_c"),
        w_sib=tensors["w_sib"],
        ntn1=ntn("ntn1"), ntn2=ntn("ntn2"), ntn3=ntn("ntn3"), ntn4=ntn("ntn4"),
        u_p=tensors["u_p"],
        pseudo_leaf=tensors["pseudo_leaf"], pseudo_root=tensors["pseudo_root"],
    )


class PathCache:
    """Memoized capped path enumeration over one immutable taxonomy."""

    def __init__(self, tax: Taxonomy, max_paths: int = DEFAULT_MAX_PATHS,
                 seed: int = 0):
        self.tax = tax
        self.max_paths = max_paths
        self.seed = seed
        self._anc: dict[str, list[TaxoPath]] = {}
        self._desc: dict[str, list[TaxoPath]] = {}

    def ancestral(self, node: str) -> list[TaxoPath]:
        if node not in self._anc:
            self._anc[node] = ancestral_paths(self.tax, node, self.max_paths,
                                              self.seed)
        return self._anc[node]

    def descendant(self, node: str) -> list[TaxoPath]:
        if node not in self._desc:
            self._desc[node] = descendant_paths(self.tax, node, self.max_paths,
                                                self.seed + 1)
        return self._desc[node]


def _pick_path(paths: list[TaxoPath], rng) -> tuple[str, ...]:
    """Training samples uniformly; evaluation (rng=None) picks the longest
    path, tie-broken lexicographically, for reproducible rankings."""
    if not paths:
        return ()
    if rng is None:
        longest = max(len(p.nodes) for p in paths)
        return min(p.nodes for p in paths if len(p.nodes) == longest)
    return paths[int(rng.integers(len(paths)))].nodes


def _endpoint_embedding(model: ModelParams, table: EmbeddingTable, node):
    if node is PSEUDO_LEAF:
        return model.pseudo_leaf, "pseudo_leaf"
    if node is PSEUDO_ROOT:
        return model.pseudo_root, "pseudo_root"
    return table.lookup(node, model.dtype), None


def encode_parent(model: ModelParams, table: EmbeddingTable, tax: Taxonomy,
                  p, rng=None, path_cache: PathCache | None = None):
    """g(p) = x_p (+) LSTM over one ancestral path; returns (g_p, tape)."""
    x_p, placeholder = _endpoint_embedding(model, table, p)
    if placeholder is None:
        cache = path_cache or PathCache(tax)
        path = _pick_path(cache.ancestral(p), rng)
    else:
        path = ()
    xs = [table.lookup(n, model.dtype) for n in path]
    h_final, lstm_tape = lstm_forward(model.lstm_parent, xs)
    g_p = np.concatenate([x_p, h_final])
    return g_p, (placeholder, lstm_tape)


def encode_child(model: ModelParams, table: EmbeddingTable, tax: Taxonomy,
                 c, rng=None, path_cache: PathCache | None = None):
    """g(c) = x_c (+) LSTM over one descendant path, child-to-leaf order."""
    x_c, placeholder = _endpoint_embedding(model, table, c)
    if placeholder is None:
        cache = path_cache or PathCache(tax)
        path = _pick_path(cache.descendant(c), rng)
    else:
        path = ()
    xs = [table.lookup(n, model.dtype) for n in path]
    h_final, lstm_tape = lstm_forward(model.lstm_child, xs)
    g_c = np.concatenate([x_c, h_final])
    return g_c, (placeholder, lstm_tape)


def select_siblings(tax: Taxonomy, table: EmbeddingTable, parent, exclude,
                    t: int, rng=None, dtype=np.float32) -> np.ndarray:
    """Up to ``t`` sibling embedding rows: children of the candidate parent
    minus the candidate child, uniform seeded sample when over-full."""
    if parent is PSEUDO_ROOT or parent not in tax:
        pool: list[str] = []
    else:
        pool = sorted(tax.children(parent) - {exclude})
    if len(pool) > t:
        if rng is None:
            pool = pool[:t]
        else:
            idx = sorted(rng.choice(len(pool), size=t, replace=False))
            pool = [pool[i] for i in idx]
    if not pool:
        return np.zeros((0, table.dim), dtype=dtype)
    return np.stack([table.lookup(n, dtype) for n in pool])


def sibling_attention(model: ModelParams, e_q: np.ndarray, g_p: np.ndarray,
                      g_c: np.ndarray, sibling_embs: np.ndarray):
    """a(p) = sum_i softmax(e_q^T W_sib [g_p; g_c; x_si])_i * x_si.

    Returns (a, alpha, tape); an empty sibling set yields a zero vector.
    """
    d = model.d
    g = model.g_dim
    if sibling_embs.shape[0] == 0:
        return (np.zeros(d, dtype=model.dtype), np.empty(0, dtype=model.dtype),
                None)
    r = model.w_sib.T @ e_q  # (2g + d,)
    const = r[:g] @ g_p + r[g:2 * g] @ g_c
    phi = sibling_embs @ r[2 * g:] + const
    alpha = softmax(phi)
    a = alpha @ sibling_embs
    return a, alpha, (e_q, g_p, g_c, sibling_embs, r, alpha)


def _sibling_attention_backward(model: ModelParams, tape, da: np.ndarray):
    """Gradients wrt W_sib / g_p / g_c given d(loss)/d(a)."""
    e_q, g_p, g_c, S, r, alpha = tape
    g = model.g_dim
    dalpha = S @ da
    dphi = alpha * (dalpha - alpha @ dalpha)
    dconst = dphi.sum()
    dr = np.concatenate([dconst * g_p, dconst * g_c, S.T @ dphi])
    dw_sib = np.outer(e_q, dr)
    dg_p = dconst * r[:g]
    dg_c = dconst * r[g:2 * g]
    return dw_sib, dg_p, dg_c


def score_position(model: ModelParams, e_q: np.ndarray, tax: Taxonomy,
                   table: EmbeddingTable, position: Position, t: int = 5,
                   rng=None, path_cache: PathCache | None = None,
                   sibling_embs: np.ndarray | None = None,
                   enc_cache: dict | None = None):
    """Score one candidate position; returns (ScoreBundle, tape).

    ``sibling_embs`` lets callers reuse a precomputed sibling sample (the
    evaluator samples once per position and shares it across queries);
    ``enc_cache`` memoizes g(p)/g(c), valid only with deterministic paths
    (rng=None) and a frozen model.
    """
    e_q = np.asarray(e_q, dtype=model.dtype)
    cache = path_cache or PathCache(tax)
    if enc_cache is not None and rng is None:
        key_p = ("p", position.parent if not isinstance(position.parent, PseudoNode)
                 else position.parent.token)
        if key_p not in enc_cache:
            enc_cache[key_p] = encode_parent(model, table, tax,
                                             position.parent, None, cache)
        g_p, tape_p = enc_cache[key_p]
        key_c = ("c", position.child if not isinstance(position.child, PseudoNode)
                 else position.child.token)
        if key_c not in enc_cache:
            enc_cache[key_c] = encode_child(model, table, tax,
                                            position.child, None, cache)
        g_c, tape_c = enc_cache[key_c]
    else:
        g_p, tape_p = encode_parent(model, table, tax, position.parent, rng, cache)
        g_c, tape_c = encode_child(model, table, tax, position.child, rng, cache)

    full = model.variant == "full"
    if full:
        if sibling_embs is None:
            sibling_embs = select_siblings(tax, table, position.parent,
                                           position.child, t, rng, model.dtype)
        a, alpha, sib_tape = sibling_attention(model, e_q, g_p, g_c,
                                               sibling_embs)
        v4 = np.concatenate([g_p, g_c, a])
    else:
        a, alpha, sib_tape = None, np.empty(0, dtype=model.dtype), None
        v4 = np.concatenate([g_p, g_c])

    s1, z1, t1 = ntn_forward(model.ntn1, e_q, g_p)
    s2, z2, t2 = ntn_forward(model.ntn2, e_q, g_c)
    if full:
        s3, z3, t3 = ntn_forward(model.ntn3, e_q, a)
    else:
        s3, z3, t3 = 0.0, None, None
    s4, z4, t4 = ntn_forward(model.ntn4, e_q, v4)

    zcat = ([z1, z2, z3, z4] if full else [z1, z2, z4])
    sp = float(model.u_p @ np.concatenate(zcat))

    bundle = ScoreBundle(s1, s2, s3, s4, sp, alpha)
    tape = {"e_q": e_q, "g_p": g_p, "g_c": g_c,
            "tape_p": tape_p, "tape_c": tape_c, "sib_tape": sib_tape,
            "ntn_tapes": (t1, t2, t3, t4), "zcat": zcat, "full": full}
    return bundle, tape


def score_backward(model: ModelParams, tape, dscores: dict[str, float]
                   ) -> dict[str, np.ndarray]:
    """Backward through the whole scorer given d(loss)/d(each logit).

    ``dscores`` holds keys s1..s4 and sp.  Returns gradients keyed like
    ``param_dict``; untouched blocks are simply absent.
    """
    k = model.k
    full = tape["full"]
    t1, t2, t3, t4 = tape["ntn_tapes"]
    dsp = dscores.get("sp", 0.0)
    dzcat = dsp * model.u_p
    grads: dict[str, np.ndarray] = {}
    grads["u_p"] = dsp * np.concatenate(tape["zcat"])

    def run_ntn(prefix, params, ntn_tape, ds, dz_extra):
        g, du, dv = ntn_backward(params, ntn_tape, ds, dz_extra)
        for name, val in g.items():
            grads[f"{prefix}.{name}"] = val
        return dv

    dg_p = run_ntn("ntn1", model.ntn1, t1, dscores.get("s1", 0.0), dzcat[:k])
    dg_c = run_ntn("ntn2", model.ntn2, t2, dscores.get("s2", 0.0), dzcat[k:2 * k])
    g_dim = model.g_dim
    if full:
        da = run_ntn("ntn3", model.ntn3, t3, dscores.get("s3", 0.0),
                     dzcat[2 * k:3 * k])
        dv4 = run_ntn("ntn4", model.ntn4, t4, dscores.get("s4", 0.0),
                      dzcat[3 * k:])
        dg_p = dg_p + dv4[:g_dim]
        dg_c = dg_c + dv4[g_dim:2 * g_dim]
        da = da + dv4[2 * g_dim:]
        if tape["sib_tape"] is not None:
            dw_sib, dg_p_sib, dg_c_sib = _sibling_attention_backward(
                model, tape["sib_tape"], da)
            grads["w_sib"] = dw_sib
            dg_p = dg_p + dg_p_sib
            dg_c = dg_c + dg_c_sib
    else:
        dv4 = run_ntn("ntn4", model.ntn4, t4, dscores.get("s4", 0.0),
                      dzcat[2 * k:])
        dg_p = dg_p + dv4[:g_dim]
        dg_c = dg_c + dv4[g_dim:]

    d = model.d
    for (placeholder, lstm_tape), lstm_params, prefix, dg in (
            (tape["tape_p"], model.lstm_parent, "lstm_p", dg_p),
            (tape["tape_c"], model.lstm_child, "lstm_c", dg_c)):
        if placeholder is not None:
            prev = grads.get(placeholder)
            grads[placeholder] = dg[:d] if prev is None else prev + dg[:d]
        lstm_grads = lstm_backward(lstm_params, lstm_tape, dg[d:])
        for name, val in lstm_grads.items():
            key = f"{prefix}.{name}"
            grads[key] = grads.get(key, 0) + val
    return grads
