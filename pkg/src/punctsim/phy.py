"""Packet decodability models and the distance -> link quality map.

Two interchangeable models translate a TTI's puncturing pattern into
per-user decode success:

* threshold: success iff the punctured symbol count stays below a margin
  fraction of the user's TTI transport.  Linear, instant, no channel noise.
* erasure_ldpc: the user's TTI transport (one symbol per SC per mini-slot)
  is a codeword of a regular LDPC code at the MCS code rate; punctured and
  channel-erased symbols must be recovered by iterative peeling.  Sharply
  nonlinear in the puncture count, which is what makes placement matter.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

ERASURE_CLAMP = 0.95
LOGISTIC_STEEPNESS = 1.0  # per dB


@dataclass(frozen=True)
class LinkQuality:
    """One user's channel state for a TTI."""

    snr_db: float
    sc_erasure_prob: float

    def __post_init__(self):
        if not (0.0 <= self.sc_erasure_prob < 1.0):
            raise ValueError("sc_erasure_prob must lie in [0, 1)")


@dataclass(frozen=True)
class ChannelParams:
    tx_power_dbm: float = 46.0
    noise_dbm: float = -84.0
    pathloss_ref_db: float = 30.0   # at reference distance
    ref_distance_m: float = 1.0
    pathloss_exponent: float = 3.0
    shadowing_std_db: float = 4.0


def snr_from_distance(distance_m: float, params: ChannelParams) -> float:
    """Log-distance pathloss budget, before shadowing."""
    d = max(distance_m, params.ref_distance_m)
    pl = params.pathloss_ref_db + 10.0 * params.pathloss_exponent * math.log10(
        d / params.ref_distance_m)
    return params.tx_power_dbm - pl - params.noise_dbm


def erasure_prob(snr_db: float, mcs_snr_req_db: float,
                 steepness: float = LOGISTIC_STEEPNESS) -> float:
    """Logistic map of the SNR shortfall against the MCS requirement."""
    x = steepness * (mcs_snr_req_db - snr_db)
    if x > 0:
        p = 1.0 / (1.0 + math.exp(-x))
    else:
        ex = math.exp(x)
        p = ex / (1.0 + ex)
    return min(p, ERASURE_CLAMP)


def link_quality(distance_m: float, params: ChannelParams,
                 mcs_snr_req_db: float, shadow_db: float = 0.0) -> LinkQuality:
    snr = snr_from_distance(distance_m, params) + shadow_db
    return LinkQuality(snr_db=snr,
                       sc_erasure_prob=erasure_prob(snr, mcs_snr_req_db))


def decode_threshold(n_e: int, m_total_e: int, margin: float,
                     minislots: int) -> bool:
    """Success iff punctures stay within margin * (M * n_e) symbols."""
    if n_e <= 0:
        return True
    if not (0 <= m_total_e <= minislots * n_e):
        raise ValueError("puncture total outside [0, M*n_e]")
    return m_total_e <= margin * (minislots * n_e)


class LdpcCode:
    """Regular (dv, dc) bipartite parity graph over n symbol nodes.

    Built by the configuration model: variable sockets are permuted onto
    check sockets, then parallel edges are repaired by socket swaps so
    every variable has degree dv and every check degree dc exactly.
    """

    def __init__(self, n: int, dv: int, dc: int, seed: int):
        if (n * dv) % dc != 0:
            raise ValueError("dv*n must be divisible by dc")
        self.n = n
        self.dv = dv
        self.dc = dc
        self.seed = seed
        self.n_checks = n * dv // dc
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, dv, dc]))
        self.edge_var = np.repeat(np.arange(n), dv)[rng.permutation(n * dv)]
        self.edge_check = np.repeat(np.arange(self.n_checks), dc)
        self._repair_parallel_edges(rng)

    def _repair_parallel_edges(self, rng, max_rounds: int = 10_000):
        n_edges = self.edge_var.size
        for _ in range(max_rounds):
            key = self.edge_check.astype(np.int64) * self.n + self.edge_var
            order = np.argsort(key, kind="stable")
            dup_pos = np.flatnonzero(np.diff(key[order]) == 0)
            if dup_pos.size == 0:
                return
            for p in order[dup_pos + 1]:
                q = int(rng.integers(n_edges))
                self.edge_var[p], self.edge_var[q] = self.edge_var[q], self.edge_var[p]
        raise RuntimeError("parallel edge repair did not converge")

    @property
    def rate(self) -> float:
        return 1.0 - self.dv / self.dc

    def info_symbols(self) -> int:
        return self.n - self.n_checks


def peel_decode(code: LdpcCode, erased) -> bool:
    """Iteratively resolve checks with exactly one erased neighbour.

    Round-parallel peeling reaches the same fixed point as any sequential
    order on the binary erasure channel.  Returns True iff every erasure
    is recovered.
    """
    erased = np.array(erased, dtype=bool)
    if erased.shape != (code.n,):
        raise ValueError("erasure mask length mismatch")
    while True:
        edge_live = erased[code.edge_var]
        per_check = np.bincount(code.edge_check[edge_live],
                                minlength=code.n_checks)
        recover = edge_live & (per_check[code.edge_check] == 1)
        if not recover.any():
            break
        erased[code.edge_var[recover]] = False
    return not erased.any()


def _degree_pair(code_rate: float) -> tuple:
    """Smallest regular (dv, dc) with dv >= 3 matching 1 - dv/dc = rate."""
    frac = Fraction(1.0 - code_rate).limit_denominator(64)
    p, q = frac.numerator, frac.denominator
    k = max(1, math.ceil(3 / p))
    return p * k, q * k


class DecodabilityModel:
    """Pluggable decode rule shared by the whole simulation.

    kind "threshold": `margin` fixes the puncture budget fraction; when
    None the budget is the MCS code-rate slack 1 - r.
    kind "erasure_ldpc": codes are built lazily per (length, rate) and
    cached; `code_seed` pins their construction.
    """

    KINDS = ("threshold", "erasure_ldpc")

    def __init__(self, kind: str = "threshold", margin: float | None = None,
                 code_seed: int = 0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown decodability kind: {kind}")
        if margin is not None and not (0.0 < margin <= 1.0):
            raise ValueError("margin must lie in (0, 1]")
        self.kind = kind
        self.margin = margin
        self.code_seed = code_seed
        self._codes: dict = {}

    def code_for(self, n_symbols: int, code_rate: float) -> LdpcCode:
        dv, dc = _degree_pair(code_rate)
        step = dc // math.gcd(dv, dc)
        n_padded = ((n_symbols + step - 1) // step) * step
        key = (n_padded, round(code_rate, 9))
        code = self._codes.get(key)
        if code is None:
            code = LdpcCode(n_padded, dv, dc, self.code_seed)
            self._codes[key] = code
        return code


def decode_user(model: DecodabilityModel, n_e: int, mcs_entry,
                punctures, quality: LinkQuality, minislots: int,
                rng: np.random.Generator) -> bool:
    """Decode one user's TTI given its per-mini-slot puncture counts."""
    if len(punctures) != minislots:
        raise ValueError("need one puncture count per mini-slot")
    if n_e <= 0:
        return True
    if any(m < 0 or m > n_e for m in punctures):
        raise ValueError("puncture counts must lie in [0, n_e]")

    if model.kind == "threshold":
        margin = model.margin if model.margin is not None else 1.0 - mcs_entry.code_rate
        return decode_threshold(n_e, int(sum(punctures)), margin, minislots)

    n_symbols = minislots * n_e
    code = model.code_for(n_symbols, mcs_entry.code_rate)
    erased = np.zeros(code.n, dtype=bool)
    # symbol sc*M + tau; a packet in mini-slot tau takes the lowest SCs
    for tau, m in enumerate(punctures):
        if m:
            erased[np.arange(m) * minislots + tau] = True
    channel = rng.random(n_symbols) < quality.sc_erasure_prob
    erased[:n_symbols] |= channel
    # padding symbols beyond M*n_e are pilots: known, never erased
    return peel_decode(code, erased)
