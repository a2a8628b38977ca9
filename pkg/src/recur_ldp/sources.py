"""Exact finite-alphabet source models.

Construction, validation, stationary analysis, entropy rate, sequence
generation and exact block probabilities for four model kinds:

* :class:`IIDSource` -- independent draws from a fixed pmf.
* :class:`MarkovSource` -- stationary finite Markov chain; the stationary
  law is solved and validated at construction.
* :class:`ConstantSource` -- emits a single symbol (zero-entropy test model;
  the only model allowed a 1-symbol alphabet).
* :class:`PeriodicSource` -- cycles a fixed pattern from a uniformly random
  phase (zero-entropy test model; the random phase makes it stationary).

Models are immutable after construction and safe to share across threads.
All generation is a deterministic function of (model, length, seed); the
underlying generator is SplitMix64 (see ``_kernels``).  Entropies are in
bits (base-2 logarithms).
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels

PMF_TOL = 1e-12
STATIONARY_TOL = 1e-10
MAX_ALPHABET = 256


class NotIrreducible(ValueError):
    """The chain has more than one closed communicating class."""


class ZeroProbability(ValueError):
    """A block probability has a zero factor."""


class ModelUnsupported(TypeError):
    """The operation is not defined for this model kind."""


class ModelSpecError(ValueError):
    """A model specification failed validation; the message names the
    offending row or entry."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _validate_pmf(pmf: np.ndarray, what: str = "pmf") -> np.ndarray:
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1:
        raise ModelSpecError(f"{what} must be a 1-d vector, got shape {pmf.shape}")
    if not 2 <= pmf.size <= MAX_ALPHABET:
        raise ModelSpecError(f"{what} length {pmf.size} outside the allowed range 2..{MAX_ALPHABET}")
    for i, p in enumerate(pmf):
        if not math.isfinite(p) or p < 0:
            raise ModelSpecError(f"{what} entry {i} is {p!r}; entries must be finite and >= 0")
        if p == 0:
            raise ModelSpecError(
                f"{what} entry {i} is zero; remove zero-probability symbols from the alphabet")
    s = float(pmf.sum())
    if abs(s - 1.0) > PMF_TOL:
        raise ModelSpecError(f"{what} sums to {s!r}, expected 1 within {PMF_TOL}")
    return pmf


def _validate_transition(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ModelSpecError(f"transition must be a square matrix, got shape {P.shape}")
    k = P.shape[0]
    if not 2 <= k <= MAX_ALPHABET:
        raise ModelSpecError(f"transition size {k} outside the allowed range 2..{MAX_ALPHABET}")
    for i in range(k):
        row = P[i]
        for j, p in enumerate(row):
            if not math.isfinite(p) or p < 0:
                raise ModelSpecError(
                    f"transition row {i} has invalid entry {p!r} at column {j}; "
                    "entries must be finite and >= 0")
        s = float(row.sum())
        if abs(s - 1.0) > PMF_TOL:
            raise ModelSpecError(f"transition row {i} sums to {s!r}, expected 1 within {PMF_TOL}")
    return P


def _closed_class_count(P: np.ndarray) -> int:
    """Number of closed communicating classes of the positive-entry digraph."""
    adj = csr_matrix(P > 0)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    closed = 0
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        # closed iff no positive transition leaves the class
        outside = np.ones(P.shape[0], dtype=bool)
        outside[members] = False
        if not (P[np.ix_(members, outside)] > 0).any():
            closed += 1
    return closed


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    """Unique stationary law pi of a row-stochastic matrix (pi @ P = pi).

    Small chains (size <= 64) use a direct linear solve; larger ones a damped
    power iteration (the damping handles periodic chains).  Raises
    :class:`NotIrreducible` when more than one closed communicating class
    exists, since pi is then not unique.
    """
    P = _validate_transition(transition)
    k = P.shape[0]
    closed = _closed_class_count(P)
    if closed > 1:
        raise NotIrreducible(
            f"chain has {closed} closed communicating classes; stationary law is not unique")
    if k <= 64:
        A = P.T - np.eye(k)
        A[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
    else:
        pi = np.full(k, 1.0 / k)
        for _ in range(1_000_000):
            nxt = 0.5 * (pi + pi @ P)  # lazy-chain damping keeps periodic chains convergent
            if np.abs(nxt - pi).max() < 1e-12:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    resid = float(np.abs(pi @ P - pi).max())
    if resid > STATIONARY_TOL:
        raise ArithmeticError(f"stationary solve residual {resid:.3e} exceeds {STATIONARY_TOL}")
    return pi


@dataclass(frozen=True)
class ChainClassification:
    """Cycle structure of a finite chain: irreducibility and period.

    ``period`` is the gcd of all cycle lengths of the positive-entry digraph
    (per strongly connected component, combined by gcd).  ``aperiodic`` is
    ``period == 1``.  An irreducible aperiodic chain satisfies the
    exponential-mixing hypotheses used by the tail experiments.
    """
    irreducible: bool
    aperiodic: bool
    period: int

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


def classify_chain(transition: np.ndarray) -> ChainClassification:
    """Classify a row-stochastic matrix by strong connectivity and period."""
    P = _validate_transition(transition)
    k = P.shape[0]
    adj = csr_matrix(P > 0)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    period = 0
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        inside = set(members.tolist())
        edges = [(u, v) for u in members for v in np.nonzero(P[u] > 0)[0] if v in inside]
        if not edges:
            continue
        # BFS levels from the first member; gcd of level[u]+1-level[v] over edges
        level = {int(members[0]): 0}
        frontier = [int(members[0])]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.nonzero(P[u] > 0)[0]:
                    v = int(v)
                    if v in inside and v not in level:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        g = 0
        for u, v in edges:
            g = math.gcd(g, level[u] + 1 - level[v])
        period = math.gcd(period, abs(g))
    period = max(period, 1)
    return ChainClassification(irreducible=(ncomp == 1), aperiodic=(period == 1), period=period)


@dataclass(frozen=True, eq=False)
class IIDSource:
    """Independent draws from a fixed pmf over symbols 0..len(pmf)-1."""
    pmf: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pmf", _readonly(_validate_pmf(self.pmf)))

    @property
    def alphabet_size(self) -> int:
        return int(self.pmf.size)


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """Stationary finite Markov chain.

    ``stationary`` is derived at construction and validated to satisfy
    ``pi @ P = pi`` within 1e-10 and sum to 1 within 1e-12.  Zero transition
    probabilities are allowed (periodic test chains need them); impossible
    blocks surface as :class:`ZeroProbability` from
    :func:`block_probability`.
    """
    transition: np.ndarray
    stationary: np.ndarray = None  # derived; do not pass

    def __post_init__(self):
        P = _validate_transition(self.transition)
        pi = stationary_distribution(P)
        if abs(float(pi.sum()) - 1.0) > PMF_TOL:
            raise ArithmeticError("stationary vector does not sum to 1 within tolerance")
        object.__setattr__(self, "transition", _readonly(P))
        object.__setattr__(self, "stationary", _readonly(pi))

    @property
    def alphabet_size(self) -> int:
        return int(self.transition.shape[0])


@dataclass(frozen=True, eq=False)
class ConstantSource:
    """Always emits ``symbol`` (zero-entropy degenerate test model)."""
    symbol: int = 0

    def __post_init__(self):
        s = int(self.symbol)
        if not 0 <= s < MAX_ALPHABET:
            raise ModelSpecError(f"constant symbol {s} outside 0..{MAX_ALPHABET - 1}")
        object.__setattr__(self, "symbol", s)

    @property
    def alphabet_size(self) -> int:
        return self.symbol + 1


@dataclass(frozen=True, eq=False)
class PeriodicSource:
    """Cycles ``pattern`` starting from a uniformly random phase
    (zero-entropy test model)."""
    pattern: np.ndarray

    def __post_init__(self):
        pat = np.asarray(self.pattern)
        if pat.ndim != 1 or pat.size < 1:
            raise ModelSpecError("pattern must be a nonempty 1-d sequence of symbols")
        for i, v in enumerate(pat):
            if int(v) != v or not 0 <= int(v) < MAX_ALPHABET:
                raise ModelSpecError(
                    f"pattern entry {i} is {v!r}; entries must be integers in 0..{MAX_ALPHABET - 1}")
        object.__setattr__(self, "pattern", _readonly(pat.astype(np.uint8)))

    @property
    def alphabet_size(self) -> int:
        return int(self.pattern.max()) + 1


SourceModel = Union[IIDSource, MarkovSource, ConstantSource, PeriodicSource]


def entropy_rate(model: SourceModel) -> float:
    """Shannon entropy rate of the source in bits per symbol."""
    if isinstance(model, IIDSource):
        p = model.pmf
        return float(-(p * np.log2(p)).sum()) + 0.0
    if isinstance(model, MarkovSource):
        P = model.transition
        pi = model.stationary
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(P > 0, P * np.log2(np.where(P > 0, P, 1.0)), 0.0)
        return float(-(pi @ plogp.sum(axis=1))) + 0.0
    if isinstance(model, (ConstantSource, PeriodicSource)):
        return 0.0
    raise ModelUnsupported(f"unknown model type {type(model).__name__}")


def _kernel_params(model: SourceModel):
    """(kind, iid_cdf, trans_cdf, stat_cdf, const_symbol, pattern) for kernels."""
    empty1 = np.empty(0, dtype=np.float64)
    empty2 = np.empty((0, 0), dtype=np.float64)
    empty8 = np.empty(0, dtype=np.uint8)
    if isinstance(model, IIDSource):
        cdf = np.cumsum(model.pmf)
        cdf[-1] = 1.0
        return _kernels.KIND_IID, cdf, empty2, empty1, 0, empty8
    if isinstance(model, MarkovSource):
        tc = np.cumsum(model.transition, axis=1)
        tc[:, -1] = 1.0
        sc = np.cumsum(model.stationary)
        sc[-1] = 1.0
        return _kernels.KIND_MARKOV, empty1, tc, sc, 0, empty8
    if isinstance(model, ConstantSource):
        return _kernels.KIND_CONSTANT, empty1, empty2, empty1, model.symbol, empty8
    if isinstance(model, PeriodicSource):
        return _kernels.KIND_PERIODIC, empty1, empty2, empty1, 0, model.pattern
    raise ModelUnsupported(f"unknown model type {type(model).__name__}")


def generate(model: SourceModel, length: int, seed: int) -> np.ndarray:
    """Stationary sample path of `length` symbols (uint8), deterministic in
    (model, length, seed).

    Markov paths start from the stationary law; periodic paths start from a
    seed-derived uniformly random phase.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern = _kernel_params(model)
    out = np.empty(int(length), dtype=np.uint8)
    _kernels.fill_sequence(kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern, out, np.uint64(seed))
    return out


def time_reversed_transition(model: MarkovSource) -> np.ndarray:
    """Reversed kernel Ptilde[i, j] = pi[j] * P[j, i] / pi[i].

    Running the reversed kernel backward from a state reproduces the
    stationary chain conditioned on that state.
    """
    if not isinstance(model, MarkovSource):
        raise ModelUnsupported("time reversal is defined for Markov models only")
    P = model.transition
    pi = model.stationary
    if (pi <= 0).any():
        raise ZeroProbability("stationary law has zero entries; reversal undefined there")
    rev = (pi[None, :] * P.T) / pi[:, None]
    rev = rev / rev.sum(axis=1, keepdims=True)
    return rev


def generate_past_given_block(model: SourceModel, block: Sequence[int],
                              past_length: int, seed: int) -> np.ndarray:
    """Sample `past_length` symbols of past conditioned on the present block.

    IID pasts are independent of the block.  Markov pasts are generated
    backward from state block[0] with the time-reversed kernel, so the joint
    law of (past, block) matches the stationary chain conditioned on the
    block.  Returned in forward order (last entry is adjacent to the block).
    """
    block = _as_block(model, block)
    if past_length < 1:
        raise ValueError(f"past_length must be >= 1, got {past_length}")
    out = np.empty(int(past_length), dtype=np.uint8)
    if isinstance(model, IIDSource):
        kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern = _kernel_params(model)
        _kernels.fill_sequence(kind, iid_cdf, trans_cdf, stat_cdf, sym, pattern, out, np.uint64(seed))
        return out
    if isinstance(model, MarkovSource):
        rev = time_reversed_transition(model)
        rev_cdf = np.cumsum(rev, axis=1)
        rev_cdf[:, -1] = 1.0
        _kernels.fill_past_markov(rev_cdf, int(block[0]), out, np.uint64(seed))
        return out
    raise ModelUnsupported(
        f"conditional past sampling is not defined for {type(model).__name__}")


class BlockProbability(NamedTuple):
    probability: float
    log2_probability: float


def _as_block(model: SourceModel, block) -> np.ndarray:
    b = np.asarray(block)
    if b.ndim != 1 or b.size < 1:
        raise ValueError("block must be a nonempty 1-d sequence of symbols")
    # degenerate test models emit a fixed set of symbols; anything else is a
    # zero-probability block, not an alphabet error
    bound = MAX_ALPHABET if isinstance(model, (ConstantSource, PeriodicSource)) \
        else model.alphabet_size
    if np.any(b < 0) or np.any(b >= bound):
        bad = int(np.nonzero((b < 0) | (b >= bound))[0][0])
        raise ValueError(
            f"block entry {bad} is {int(b[bad])}, outside alphabet 0..{bound - 1}")
    return b.astype(np.uint8)


def block_probability(model: SourceModel, block: Sequence[int]) -> BlockProbability:
    """Exact stationary probability of a block, computed in log space.

    Returns (probability, log2_probability); the log value is authoritative
    (the linear value underflows to 0 for long blocks).  Raises
    :class:`ZeroProbability` if any factor vanishes, naming the position.
    """
    b = _as_block(model, block)
    if isinstance(model, IIDSource):
        p = model.pmf[b]
        # pmf entries are validated positive at construction
        lp = float(np.log2(p).sum())
    elif isinstance(model, MarkovSource):
        pi = model.stationary
        P = model.transition
        if pi[b[0]] <= 0:
            raise ZeroProbability(f"stationary probability of first symbol {int(b[0])} is 0")
        steps = P[b[:-1], b[1:]]
        if (steps <= 0).any():
            i = int(np.nonzero(steps <= 0)[0][0])
            raise ZeroProbability(
                f"transition {int(b[i])} -> {int(b[i + 1])} at block position {i} has probability 0")
        lp = float(math.log2(pi[b[0]]) + np.log2(steps).sum())
    elif isinstance(model, ConstantSource):
        if np.any(b != model.symbol):
            i = int(np.nonzero(b != model.symbol)[0][0])
            raise ZeroProbability(f"block position {i} differs from the constant symbol")
        lp = 0.0
    elif isinstance(model, PeriodicSource):
        pat = model.pattern
        L = pat.size
        idx = np.arange(b.size)
        hits = sum(1 for phase in range(L) if np.array_equal(pat[(phase + idx) % L], b))
        if hits == 0:
            raise ZeroProbability("block matches no phase of the pattern")
        lp = float(math.log2(hits / L))
    else:
        raise ModelUnsupported(f"unknown model type {type(model).__name__}")
    return BlockProbability(float(2.0 ** lp), lp)


# ---------------------------------------------------------------------------
# JSON model specifications
# ---------------------------------------------------------------------------

def model_from_spec(spec: dict) -> SourceModel:
    """Build a model from a JSON-style dict:
    ``{"kind": "iid"|"markov"|"constant"|"periodic", "pmf": [...],
    "transition": [[...]], "symbol": int, "pattern": [...]}``."""
    if not isinstance(spec, dict):
        raise ModelSpecError(f"model spec must be an object, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind == "iid":
        if "pmf" not in spec:
            raise ModelSpecError('iid model spec requires a "pmf" field')
        return IIDSource(np.asarray(spec["pmf"], dtype=float))
    if kind == "markov":
        if "transition" not in spec:
            raise ModelSpecError('markov model spec requires a "transition" field')
        return MarkovSource(np.asarray(spec["transition"], dtype=float))
    if kind == "constant":
        return ConstantSource(int(spec.get("symbol", 0)))
    if kind == "periodic":
        if "pattern" not in spec:
            raise ModelSpecError('periodic model spec requires a "pattern" field')
        return PeriodicSource(np.asarray(spec["pattern"]))
    raise ModelSpecError(
        f'unknown model kind {kind!r}; expected "iid", "markov", "constant" or "periodic"')


def model_to_spec(model: SourceModel) -> dict:
    """Round-trippable JSON-style dict for a model (manifest echoing)."""
    if isinstance(model, IIDSource):
        return {"kind": "iid", "pmf": model.pmf.tolist()}
    if isinstance(model, MarkovSource):
        return {"kind": "markov", "transition": model.transition.tolist()}
    if isinstance(model, ConstantSource):
        return {"kind": "constant", "symbol": model.symbol}
    if isinstance(model, PeriodicSource):
        return {"kind": "periodic", "pattern": model.pattern.tolist()}
    raise ModelUnsupported(f"unknown model type {type(model).__name__}")


def load_model(path) -> SourceModel:
    """Load a model from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_spec(json.load(fh))


def model_id(model: SourceModel) -> str:
    """Compact deterministic identifier used in CSV output."""
    if isinstance(model, IIDSource):
        if model.alphabet_size <= 4:
            return "iid[" + ",".join(repr(float(p)) for p in model.pmf) + "]"
        return f"iid{model.alphabet_size}#{zlib.crc32(model.pmf.tobytes()):08x}"
    if isinstance(model, MarkovSource):
        if model.alphabet_size <= 3:
            rows = ";".join(",".join(repr(float(p)) for p in row) for row in model.transition)
            return f"markov[{rows}]"
        return f"markov{model.alphabet_size}#{zlib.crc32(model.transition.tobytes()):08x}"
    if isinstance(model, ConstantSource):
        return f"constant[{model.symbol}]"
    if isinstance(model, PeriodicSource):
        return "periodic[" + ",".join(str(int(v)) for v in model.pattern) + "]"
    raise ModelUnsupported(f"unknown model type {type(model).__name__}")
