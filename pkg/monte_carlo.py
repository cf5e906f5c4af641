"""
Seeded Metropolis sampler on tori
محاكاة مونت كارلو - سلاسل ميتروبوليس مع إدراج/حذف وتدوير وانزلاق

State is an int8 array occ[o, i, j]: o = 0 is the edge from vertex (i, j)
to the right, o = 1 the edge upwards, both with wraparound. One sweep is
2*W*H proposals. Random numbers are drawn per sweep from a numpy PCG64
stream seeded by SeedSequence([seed, chain_index]) and handed to the
compiled kernel, so a chain is reproducible regardless of scheduling.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from numba import njit
from tqdm import tqdm

from dimer_model import BoundaryCondition, DimerConfig, energy_delta
from model_errors import GeometryError, InvalidMoveError, ModelError

logger = logging.getLogger(__name__)

FLIP, PIVOT, SLIDE = 0, 1, 2
MOVE_NAMES = ("flip", "pivot", "slide")
INIT_CHOICES = ("empty", "packed_vertical", "packed_horizontal", "file")
OBSERVABLES = ("n_horizontal", "n_vertical", "n_vacancies", "n_broken", "energy", "rb_horizontal")


# ==================== Compiled kernels ====================

@njit(cache=True)
def _occ(occ, o, i, j, W, H):
    return occ[o, i % W, j % H]


@njit(cache=True)
def _covered(occ, i, j, W, H):
    i %= W
    j %= H
    return (occ[0, i, j] | occ[0, (i - 1) % W, j] | occ[1, i, j] | occ[1, i, (j - 1) % H]) != 0


@njit(cache=True)
def _insertable(occ, o, i, j, W, H):
    if occ[o, i, j]:
        return False
    if _covered(occ, i, j, W, H):
        return False
    if o == 0:
        return not _covered(occ, i + 1, j, W, H)
    return not _covered(occ, i, j + 1, W, H)


@njit(cache=True)
def _along(o, i, j, k):
    if o == 0:
        return i + k, j
    return i, j + k


@njit(cache=True)
def _delta(occ, o, i, j, W, H, lam, a):
    """Energy change of toggling edge (o, i, j)."""
    period = W if o == 0 else H
    removing = occ[o, i, j] != 0
    d_vac = 2 if removing else -2
    d_broken = 0
    for k in (-1, 1):
        if k == 1 and period == 2:
            break                      # middles e-1 and e+1 coincide
        lo_off, hi_off = k - 1, k + 1
        li, lj = _along(o, i, j, lo_off)
        hi_i, hi_j = _along(o, i, j, hi_off)
        lo_now = _occ(occ, o, li, lj, W, H) != 0
        hi_now = _occ(occ, o, hi_i, hi_j, W, H) != 0
        lo_next = (not removing) if lo_off % period == 0 else lo_now
        hi_next = (not removing) if hi_off % period == 0 else hi_now
        d_broken += int(lo_next != hi_next) - int(lo_now != hi_now)
    return 0.5 * (lam + a) * d_vac + 0.5 * a * d_broken


@njit(cache=True)
def _accept(delta, beta, u):
    return delta <= 0.0 or u < math.exp(-beta * delta)


@njit(cache=True)
def _decode(idx, W, H):
    o = idx // (W * H)
    r = idx % (W * H)
    return o, r // H, r % H


@njit(cache=True)
def _relocate(o, i, j, aux, kind):
    """Target edge of a pivot (aux in 0..3) or slide (aux in 0..1)."""
    if kind == SLIDE:
        step = 1 if aux % 2 == 0 else -1
        ni, nj = _along(o, i, j, step)
        return o, ni, nj
    # pivot about an endpoint, onto the perpendicular edge on either side
    ex, ey = (i, j) if aux // 2 == 0 else _along(o, i, j, 1)
    if o == 0:
        return 1, ex, (ey if aux % 2 == 0 else ey - 1)
    return 0, (ex if aux % 2 == 0 else ex - 1), ey


@njit(cache=True)
def _propose(occ, W, H, beta, lam, a, idx, u, kind, aux, counters):
    o, i, j = _decode(idx, W, H)
    counters[kind, 0] += 1
    if kind == FLIP:
        if occ[o, i, j] == 0 and not _insertable(occ, o, i, j, W, H):
            return
        delta = _delta(occ, o, i, j, W, H, lam, a)
        if _accept(delta, beta, u):
            occ[o, i, j] = 1 - occ[o, i, j]
            counters[kind, 1] += 1
        return
    if occ[o, i, j] == 0:
        return
    no, ni, nj = _relocate(o, i, j, aux, kind)
    ni %= W
    nj %= H
    delta = _delta(occ, o, i, j, W, H, lam, a)
    occ[o, i, j] = 0
    if not _insertable(occ, no, ni, nj, W, H):
        occ[o, i, j] = 1
        return
    delta += _delta(occ, no, ni, nj, W, H, lam, a)
    if _accept(delta, beta, u):
        occ[no, ni, nj] = 1
        counters[kind, 1] += 1
    else:
        occ[o, i, j] = 1


@njit(cache=True)
def _sweep(occ, W, H, beta, lam, a, idx_draws, u_draws, kind_draws, aux_draws, p_pivot, p_slide, counters):
    for t in range(idx_draws.shape[0]):
        r = kind_draws[t]
        kind = PIVOT if r < p_pivot else (SLIDE if r < p_pivot + p_slide else FLIP)
        _propose(occ, W, H, beta, lam, a, idx_draws[t], u_draws[t], kind, aux_draws[t], counters)


@njit(cache=True)
def _measure(occ, W, H, beta, lam, a):
    n_h = 0
    n_v = 0
    n_vac = 0
    n_broken = 0
    rb = 0.0
    for i in range(W):
        for j in range(H):
            n_h += occ[0, i, j]
            n_v += occ[1, i, j]
            if not _covered(occ, i, j, W, H):
                n_vac += 1
            for o in range(2):
                li, lj = _along(o, i, j, -1)
                hi_i, hi_j = _along(o, i, j, 1)
                if _occ(occ, o, li, lj, W, H) != _occ(occ, o, hi_i, hi_j, W, H):
                    n_broken += 1
            # heat-bath probability that the horizontal edge at (i, j) is occupied
            if occ[0, i, j] != 0:
                rb += 1.0 / (1.0 + math.exp(-beta * _delta(occ, 0, i, j, W, H, lam, a)))
            elif _insertable(occ, 0, i, j, W, H):
                rb += 1.0 / (1.0 + math.exp(beta * _delta(occ, 0, i, j, W, H, lam, a)))
    energy = 0.5 * (lam + a) * n_vac + 0.5 * a * n_broken
    return n_h, n_v, n_vac, n_broken, energy, rb / (W * H)


@njit(cache=True)
def _hard_core_ok(occ, W, H):
    for i in range(W):
        for j in range(H):
            count = occ[0, i, j] + occ[0, (i - 1) % W, j] + occ[1, i, j] + occ[1, i, (j - 1) % H]
            if count > 1:
                return False
    return True


@njit(cache=True)
def _block_edges(i, j, W, H):
    """Distinct edges incident to the plaquette block {i, i+1} x {j, j+1}."""
    eo = np.empty(16, dtype=np.int64)
    ei = np.empty(16, dtype=np.int64)
    ej = np.empty(16, dtype=np.int64)
    m = 0
    for di in range(2):
        for dj in range(2):
            vi, vj = i + di, j + dj
            for k in range(4):
                if k == 0:
                    o, si, sj = 0, vi, vj
                elif k == 1:
                    o, si, sj = 0, vi - 1, vj
                elif k == 2:
                    o, si, sj = 1, vi, vj
                else:
                    o, si, sj = 1, vi, vj - 1
                si %= W
                sj %= H
                seen = False
                for t in range(m):
                    if eo[t] == o and ei[t] == si and ej[t] == sj:
                        seen = True
                        break
                if not seen:
                    eo[m], ei[m], ej[m] = o, si, sj
                    m += 1
    return eo[:m], ei[:m], ej[:m]


@njit(cache=True)
def _block_occupancy(occ, i, j, W, H, beta, lam, a):
    """
    Probability that the horizontal edge (i, j) is occupied given every edge
    outside its plaquette block. occ is restored before returning.
    """
    eo, ei, ej = _block_edges(i, j, W, H)
    m = len(eo)
    held = np.zeros(m, dtype=np.int8)
    energy = 0.0
    for k in range(m):
        if occ[eo[k], ei[k], ej[k]]:
            held[k] = 1
            energy += _delta(occ, eo[k], ei[k], ej[k], W, H, lam, a)
            occ[eo[k], ei[k], ej[k]] = 0
    # depth-first over the block: choice -1 fresh, 0 empty branch done, 1 inserted, 2 exhausted
    choice = np.full(m + 1, -1, dtype=np.int64)
    step_energy = np.zeros(m, dtype=np.float64)
    z = 0.0
    z_on = 0.0
    k = 0
    while k >= 0:
        if k == m:
            w = math.exp(-beta * energy)
            z += w
            if occ[0, i, j]:
                z_on += w
            k -= 1
            continue
        c = choice[k]
        if c == -1:
            choice[k] = 0
            choice[k + 1] = -1
            k += 1
        elif c == 0:
            choice[k] = 2
            if _insertable(occ, eo[k], ei[k], ej[k], W, H):
                step_energy[k] = _delta(occ, eo[k], ei[k], ej[k], W, H, lam, a)
                energy += step_energy[k]
                occ[eo[k], ei[k], ej[k]] = 1
                choice[k] = 1
                choice[k + 1] = -1
                k += 1
        elif c == 1:
            occ[eo[k], ei[k], ej[k]] = 0
            energy -= step_energy[k]
            choice[k] = 2
        else:
            k -= 1
    for k in range(m):
        if held[k]:
            occ[eo[k], ei[k], ej[k]] = 1
    return z_on / z


@njit(cache=True)
def _block_horizontal(occ, W, H, beta, lam, a):
    total = 0.0
    for i in range(W):
        for j in range(H):
            total += _block_occupancy(occ, i, j, W, H, beta, lam, a)
    return total / (W * H)


# ==================== Chain specification ====================

class ChainSpec:
    """مواصفات السلسلة - Everything a chain needs to be reproduced bit-exactly"""

    def __init__(self, torus, params, seed, sweeps, burn_in=0, measure_every=1, init="empty",
                 anneal=None, init_file=None, p_pivot=0.0, p_slide=0.0, check_every=0,
                 chain_index=0, progress=False, snapshot_every=0):
        self.torus = torus
        self.params = params
        self.seed = int(seed)
        self.sweeps = int(sweeps)
        self.burn_in = int(burn_in)
        self.measure_every = int(measure_every)
        self.init = init
        self.anneal = [(float(b), int(s)) for b, s in (anneal or [])]
        self.init_file = init_file
        self.p_pivot = float(p_pivot)
        self.p_slide = float(p_slide)
        self.check_every = int(check_every)
        self.chain_index = int(chain_index)
        self.progress = progress
        self.snapshot_every = int(snapshot_every)
        self.validate()

    def validate(self):
        if self.sweeps <= 0:
            raise ModelError(f"sweeps must be positive, got {self.sweeps}")
        if self.burn_in < 0 or self.measure_every <= 0 or self.snapshot_every < 0:
            raise ModelError("burn_in and snapshot_every must be non-negative and measure_every positive")
        if self.init not in INIT_CHOICES:
            raise ModelError(f"unknown init '{self.init}', expected one of {INIT_CHOICES}")
        if self.init.startswith("packed") and (self.torus.K % 2 or self.torus.L % 2):
            raise GeometryError("packed initial states need an even torus", self.torus)
        if self.init == "file" and not self.init_file:
            raise ModelError("init = file requires init_file")
        if self.p_pivot < 0 or self.p_slide < 0 or self.p_pivot + self.p_slide > 1:
            raise ModelError("move probabilities must be non-negative and sum to at most 1")

    def replace(self, **changes):
        fields = dict(vars(self))
        fields.update(changes)
        return ChainSpec(**fields)

    def as_dict(self):
        return {
            "torus": [self.torus.K, self.torus.L], "params": self.params.as_dict(), "seed": self.seed,
            "chain_index": self.chain_index, "sweeps": self.sweeps, "burn_in": self.burn_in,
            "measure_every": self.measure_every, "init": self.init, "anneal": self.anneal,
            "p_pivot": self.p_pivot, "p_slide": self.p_slide,
        }

    def __repr__(self):
        return f"ChainSpec({self.torus.K}x{self.torus.L}, {self.params!r}, seed={self.seed}/{self.chain_index})"


class ChainState:
    """حالة السلسلة - Occupancy array plus per-move counters, owned by one chain"""

    def __init__(self, cfg, params):
        if not cfg.bc.is_periodic:
            raise GeometryError("the sampler runs on periodic tori", cfg.window)
        self.torus = cfg.window
        self.params = params
        self.occ = np.stack([cfg.occ_h, cfg.occ_v]).astype(np.int8)
        self.counters = np.zeros((3, 2), dtype=np.int64)

    @property
    def n_edges(self):
        return self.occ[0].size * 2

    def to_config(self):
        return DimerConfig(self.torus, BoundaryCondition.periodic(), self.occ[0] != 0, self.occ[1] != 0)

    def edge_index(self, e):
        cfg = self.to_config()
        arr, i, j = cfg._index(e)
        return (0 if arr is cfg.occ_h else 1) * self.occ[0].size + i * self.torus.L + j


class RunRecord:
    """سجل التشغيل - Measurements, acceptance rates and the final configuration"""

    def __init__(self, spec, rows, counters, final, snapshots=()):
        self.spec = spec
        self.rows = rows
        self.counters = counters
        self.final = final
        self.snapshots = list(snapshots)

    @property
    def acceptance(self):
        rates = {}
        for k, name in enumerate(MOVE_NAMES):
            proposed, accepted = self.counters[k]
            rates[name] = float(accepted) / proposed if proposed else None
        return rates

    def series(self, name, phase="measure"):
        return np.array([row[name] for row in self.rows if row["phase"] == phase], dtype=np.float64)

    def summary(self):
        """ملخص - Mean, naive standard error, autocorrelation time and ESS per observable"""
        out = {}
        for name in OBSERVABLES:
            x = self.series(name)
            if len(x) == 0:
                continue
            tau = integrated_autocorr_time(x)
            ess = len(x) / tau
            out[name] = {
                "mean": float(x.mean()),
                "stderr": float(x.std(ddof=1) / math.sqrt(ess)) if len(x) > 1 else float("nan"),
                "tau": tau, "ess": ess,
            }
        return out

    def to_jsonl(self):
        return "".join(json.dumps(row, sort_keys=True) + "\n" for row in self.rows)

    def __repr__(self):
        return f"RunRecord({self.spec!r}, measurements={len(self.rows)})"


# ==================== Running chains ====================

def make_rng(seed, chain_index=0):
    """مولد مستقل لكل سلسلة - PCG64 stream keyed by (seed, chain_index)"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(chain_index)])))


def initial_config(spec):
    if spec.init == "empty":
        return DimerConfig.empty(spec.torus, BoundaryCondition.periodic())
    if spec.init == "packed_vertical":
        return DimerConfig.packed(spec.torus, "vertical")
    if spec.init == "packed_horizontal":
        return DimerConfig.packed(spec.torus, "horizontal")
    with open(spec.init_file, "r", encoding="utf-8") as handle:
        cfg = DimerConfig.from_text(handle.read())
    if not cfg.bc.is_periodic or (cfg.window.K, cfg.window.L) != (spec.torus.K, spec.torus.L):
        raise GeometryError("initial configuration file does not match the torus", cfg.window)
    return DimerConfig(spec.torus, cfg.bc, cfg.occ_h, cfg.occ_v)


def _draws(rng, n, n_edges):
    return (rng.integers(0, n_edges, size=n), rng.random(n), rng.random(n), rng.integers(0, 4, size=n))


def step(state, rng, p_pivot=0.0, p_slide=0.0):
    """خطوة واحدة - One Metropolis proposal applied to the chain-owned state"""
    idx, u, kinds, aux = _draws(rng, 1, state.n_edges)
    p = state.params
    _sweep(state.occ, state.torus.K, state.torus.L, p.beta, p.lam, p.a, idx, u, kinds, aux,
           p_pivot, p_slide, state.counters)
    return state


def kernel_energy_delta(cfg, e, params):
    """فرق الطاقة في النواة المترجمة - Compiled energy change of toggling e"""
    state = ChainState(cfg, params)
    o, i, j = _decode(state.edge_index(e), state.torus.K, state.torus.L)
    if state.occ[o, i, j] == 0 and not _insertable(state.occ, o, i, j, state.torus.K, state.torus.L):
        raise InvalidMoveError("insertion would violate hard-core", e)
    return _delta(state.occ, o, i, j, state.torus.K, state.torus.L, params.lam, params.a)


def block_horizontal_density(cfg, params):
    """
    كثافة الأفقي بالكتل - Mean over horizontal edges of the probability that
    the edge is occupied given all edges outside the plaquette block above it.
    Its Gibbs average is the horizontal dimer density; unlike the raw count it
    stays positive (of order e^{-4 beta a}) in vertically packed states.
    """
    state = ChainState(cfg, params)
    return float(_block_horizontal(state.occ, state.torus.K, state.torus.L, params.beta, params.lam, params.a))


def _measure_row(state, params, sweep, phase):
    n_h, n_v, n_vac, n_broken, energy, rb = _measure(state.occ, state.torus.K, state.torus.L,
                                                     params.beta, params.lam, params.a)
    return {"sweep": sweep, "phase": phase, "beta": params.beta, "n_horizontal": int(n_h),
            "n_vertical": int(n_v), "n_vacancies": int(n_vac), "n_broken": int(n_broken),
            "energy": float(energy), "rb_horizontal": float(rb)}


def run(spec):
    """
    تشغيل السلسلة - Anneal stages, then burn-in, then measurement sweeps.
    Anneal stages record every measure_every sweeps with phase 'anneal'.
    """
    rng = make_rng(spec.seed, spec.chain_index)
    state = ChainState(initial_config(spec), spec.params)
    W, H = spec.torus.K, spec.torus.L
    n = state.n_edges
    stages = [(spec.params.with_beta(b), s, "anneal", 0) for b, s in spec.anneal]
    stages.append((spec.params, spec.burn_in + spec.sweeps, "measure", spec.burn_in))
    rows = []
    snapshots = []
    total = sum(s for _, s, _, _ in stages)
    done = 0
    with tqdm(total=total, disable=not spec.progress, desc=f"chain {spec.chain_index}") as bar:
        for params, sweeps, phase, skip in stages:
            for sweep in range(1, sweeps + 1):
                idx, u, kinds, aux = _draws(rng, n, n)
                _sweep(state.occ, W, H, params.beta, params.lam, params.a, idx, u, kinds, aux,
                       spec.p_pivot, spec.p_slide, state.counters)
                done += 1
                if spec.check_every and done % spec.check_every == 0 and not _hard_core_ok(state.occ, W, H):
                    raise ModelError(f"hard-core violated after sweep {done}", spec.torus)
                if sweep > skip and (sweep - skip) % spec.measure_every == 0:
                    rows.append(_measure_row(state, params, sweep, phase))
                if (phase == "measure" and spec.snapshot_every and sweep > skip
                        and (sweep - skip) % spec.snapshot_every == 0):
                    snapshots.append(state.to_config())
                bar.update(1)
    if not _hard_core_ok(state.occ, W, H):
        raise ModelError("hard-core violated in final state", spec.torus)
    logger.debug("chain %r finished: acceptance %s", spec, state.counters.tolist())
    return RunRecord(spec, rows, state.counters.copy(), state.to_config(), snapshots)


def run_chains(specs, threads=1):
    """سلاسل متعددة - One chain per worker; output order follows specs"""
    if threads and threads > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, specs))
    return [run(spec) for spec in specs]


def sample_pair(spec, seed2):
    """عينتان مستقلتان - Final configurations of two chains differing only in seed"""
    first = run(spec)
    second = first if seed2 == spec.seed else run(spec.replace(seed=seed2))
    return first.final, second.final


def sample_pairs(spec, n_pairs, threads=1):
    """n independent pairs; pair p uses chain indices 2p and 2p+1 of the master seed."""
    specs = [spec.replace(chain_index=k) for k in range(2 * n_pairs)]
    records = run_chains(specs, threads)
    return [(records[2 * p].final, records[2 * p + 1].final) for p in range(n_pairs)]


def snapshot_spacing(record):
    """Snapshot stride covering the largest integrated autocorrelation time of the measured series."""
    spec = record.spec
    if spec.snapshot_every != spec.measure_every:
        raise ModelError("snapshot spacing needs snapshot_every equal to measure_every")
    taus = [integrated_autocorr_time(record.series(name)) for name in OBSERVABLES]
    return max(1, math.ceil(max(taus)))


def thinned_snapshots(record):
    spacing = snapshot_spacing(record)
    return record.snapshots[::spacing], spacing


def sample_pairs_spaced(spec, n_pairs, threads=1):
    """
    أزواج من سلاسل طويلة - n pairs taken from the snapshots of a few long
    chains. Chains 2c and 2c+1 form one source; their snapshots are thinned
    by the larger autocorrelation time of the two and zipped. Sources are
    added until n pairs are collected. Returns (pairs, spacing per source).
    """
    spec = spec.replace(snapshot_every=spec.measure_every)
    if spec.sweeps < spec.measure_every:
        raise ModelError("chains shorter than measure_every produce no snapshots")
    batch = max(1, threads // 2)
    pairs, spacings = [], []
    c = 0
    while len(pairs) < n_pairs:
        records = run_chains([spec.replace(chain_index=k) for k in range(2 * c, 2 * (c + batch))], threads)
        for first, second in zip(records[0::2], records[1::2]):
            spacing = max(snapshot_spacing(first), snapshot_spacing(second))
            pairs += list(zip(first.snapshots[::spacing], second.snapshots[::spacing]))
            spacings.append(spacing)
        c += batch
    logger.info("%d pairs from %d chain pairs, spacings %s", n_pairs, c, spacings)
    return pairs[:n_pairs], spacings


def transition_probability(cfg_from, cfg_to, params):
    """
    احتمال الانتقال - Probability that one insert/delete proposal moves
    cfg_from to cfg_to (distinct configurations differing in one edge).
    """
    diff = [e for e in cfg_from.stored_edges() if cfg_from.occupied(e) != cfg_to.occupied(e)]
    if len(diff) != 1:
        return 0.0
    delta = energy_delta(cfg_from, diff[0], params)
    n_edges = len(cfg_from.stored_edges())
    return min(1.0, math.exp(-params.beta * delta)) / n_edges


# ==================== Diagnostics ====================

def autocorrelation(x):
    """دالة الترابط الذاتي - Normalized autocorrelation by FFT"""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    acf = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n]
    if acf[0] == 0.0:
        return np.zeros(n)
    return acf / acf[0]


def integrated_autocorr_time(x, c=5.0):
    """Integrated autocorrelation time with the self-consistent window M >= c*tau."""
    if len(x) < 2:
        return 1.0
    rho = autocorrelation(x)
    if not np.any(rho):
        return 1.0
    taus = 2.0 * np.cumsum(rho) - 1.0
    window = np.arange(len(taus)) < c * taus
    m = int(np.argmin(window)) if not window.all() else len(taus) - 1
    return max(float(taus[m]), 1.0)


