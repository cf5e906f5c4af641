"""
Verification suites
محلل مراحل التحقق - فحوص المطابقة مع التعداد الدقيق والخواص التوافقية والعينات

Each check_* stage returns a dict with 'success' and a detail payload; a
stage that raises is reported as {'success': False, 'error': ...} and the
remaining stages still run.
"""

import itertools
import logging
import math

import numpy as np

from config_graph import (ConfigGraph, component_bound_check, compress, defect_chasing_violations,
                          defect_lower_bound_check, in_EM, sub_component_sets)
from dimer_model import BoundaryCondition, DimerConfig, ModelParams, log_weight
from disagreement import PairSample, SealScales, confinement_check, sealed_grid
from exact_enumeration import (ConfigEnsemble, EventPredicate, LocalObservable, chessboard_check,
                               enumerate_configs, rp_check)
from lattice import EdgeId, Isometry, Rect, block_transforms
from monte_carlo import (ChainSpec, block_horizontal_density, integrated_autocorr_time, run, run_chains,
                         sample_pairs_spaced, thinned_snapshots, transition_probability)
from order_parameters import HORIZONTAL, VERTICAL, box_adjacent_pairs, percolation_report, psi_grid, stick_conflicts
from transfer_matrix import (Transfer1D, char_poly, fullpacked_lower_bound, spectrum, z_fullpacked, z_vacant,
                             z_vacant_enumerated)

logger = logging.getLogger(__name__)

TRIPLES = [(beta, lam, a) for beta in (0.5, 1.0, 2.0) for lam, a in ((0.0, 1.0), (-0.5, 1.0), (1.0, 0.5))]
RATIO_RTOL = 1e-10
POLY_TOL = 1e-14
VIETA_TOL = 1e-10
RP_TOL = 1e-10
CHESSBOARD_RTOL = 1e-10
BALANCE_RTOL = 1e-12
LOG_WEIGHT_TOL = 1e-12
STICK_BOUNDS = (1, 2, 4)
STICK_BETAS = (0.5, 1.0, 2.0, 4.0)

SUITES = {
    "oracle": ("check_oracle_1d", "check_char_poly", "check_expansions", "check_fullpacked"),
    "rp": ("check_reflection_positivity", "check_chessboard"),
    "sampler": ("check_detailed_balance", "check_sampler_means"),
    "combinatorics": ("check_config_graphs", "check_enumerated_sticks"),
    "nematic": ("check_sampled_sticks", "check_confinement", "check_nematic_order"),
}
SUITES["all"] = tuple(itertools.chain.from_iterable(SUITES[name] for name in
                                                    ("oracle", "rp", "sampler", "combinatorics", "nematic")))

# sizes for the full acceptance run and for the quick run used in development
SCALES = {
    "full": {"rp_draws": 100, "cb_families_4": 50, "cb_families_2": 20, "sampler_sweeps": 1_000_000,
             "windows": ((2, 2), (3, 2), (4, 2), (3, 3), (4, 3), (4, 4)), "torus_configs": None,
             "sampled_configs": 100_000, "stick_sweeps": 8000, "nematic_size": 32, "pairs": 1000,
             "nematic_sweeps": 2000, "nematic_snapshots": 200, "psi_scales": (2, 4, 8)},
    "quick": {"rp_draws": 10, "cb_families_4": 0, "cb_families_2": 5, "sampler_sweeps": 20_000,
              "windows": ((2, 2), (3, 2), (3, 3)), "torus_configs": 500,
              "sampled_configs": 200, "stick_sweeps": 400, "nematic_size": 16, "pairs": 4,
              "nematic_sweeps": 200, "nematic_snapshots": 20, "psi_scales": (2, 4)},
}


def _params(triple):
    return ModelParams(*triple)


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


class VerificationSuite:
    """محلل التحقق - Runs named suites of stages and collects their results"""

    def __init__(self, seed=20240, scale="full", threads=1, b_values=None):
        if scale not in SCALES:
            raise ValueError(f"unknown scale '{scale}'")
        self.seed = seed
        self.scale = scale
        self.sizes = SCALES[scale]
        self.threads = threads
        self.b_values = tuple(b_values or self.sizes["psi_scales"])
        self.results = []

    def _stage(self, name):
        method = getattr(self, name)
        try:
            result = method()
        except Exception as e:
            logger.exception("stage %s raised", name)
            result = {"success": False, "error": str(e)}
        result["name"] = name
        logger.info("%s: %s", name, "PASS" if result["success"] else "FAIL")
        return result

    def run(self, suite="all"):
        if suite not in SUITES:
            raise ValueError(f"unknown suite '{suite}', expected one of {sorted(SUITES)}")
        self.results = [self._stage(name) for name in SUITES[suite]]
        return self.results

    def full_suite(self):
        return self.run("all")

    # ==================== 1D oracle ====================

    def check_oracle_1d(self):
        """Enumerated vacant segments against <0|T^(L+1)|0>, constant ratio over L"""
        worst = 0.0
        for triple in TRIPLES:
            p = _params(triple)
            ratios = [z_vacant_enumerated(L, p) / z_vacant(L, p) for L in (2, 4, 6, 8)]
            worst = max(worst, max(_rel(r, ratios[0]) for r in ratios))
        return {"success": worst <= RATIO_RTOL, "max_ratio_deviation": worst}

    def check_char_poly(self):
        rng = np.random.default_rng(self.seed)
        worst_poly = worst_vieta = 0.0
        for _ in range(100):
            p = ModelParams(rng.uniform(1.0, 3.0), rng.uniform(0.0, 1.0), rng.uniform(1.0, 2.0))
            T = Transfer1D(p).entries
            minors = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0] + T[0, 0] * T[2, 2] - T[0, 2] * T[2, 0] \
                + T[1, 1] * T[2, 2] - T[1, 2] * T[2, 1]
            det = (T[0, 0] * (T[1, 1] * T[2, 2] - T[1, 2] * T[2, 1])
                   - T[0, 1] * (T[1, 0] * T[2, 2] - T[1, 2] * T[2, 0])
                   + T[0, 2] * (T[1, 0] * T[2, 1] - T[1, 1] * T[2, 0]))
            direct = (1.0, -np.trace(T), minors, -det)
            worst_poly = max(worst_poly, max(abs(x - y) for x, y in zip(direct, char_poly(p))))
            s = spectrum(p)
            x1, x2, x3 = s.roots
            A = p.vacancy_weight
            worst_vieta = max(worst_vieta, abs(x1 + x2 + x3 - A), abs(x1 * x2 + x1 * x3 + x2 * x3 + 1.0),
                              abs(x1 * x2 * x3 - (s.epsilon - A)))
        return {"success": worst_poly <= POLY_TOL and worst_vieta <= VIETA_TOL,
                "max_coefficient_error": worst_poly, "max_vieta_error": worst_vieta}

    def check_expansions(self):
        lam, a = 0.0, 1.0
        betas = np.linspace(4.0, 12.0, 17)
        logs = []
        for beta in betas:
            p = ModelParams(beta, lam, a)
            logs.append(math.log(abs(spectrum(p).x1 - (1.0 + 0.5 / p.ell0))))
        slope = float(np.polyfit(betas, logs, 1)[0])
        expected = -(lam + 2.0 * a)
        return {"success": abs(slope - expected) <= 0.1 * abs(expected), "slope": slope, "expected": expected}

    def check_fullpacked(self):
        violations = []
        for triple in TRIPLES:
            p = _params(triple)
            for L in range(4, 13, 2):
                z = z_fullpacked(L, p)
                if z < fullpacked_lower_bound(L, p):
                    violations.append((triple, L, z))
        return {"success": not violations, "violations": violations}

    # ==================== Reflection positivity & chessboard ====================

    def check_reflection_positivity(self):
        rng = np.random.default_rng(self.seed + 1)
        p = ModelParams(1.0, 0.0, 1.0)
        R = Rect.anchored(0, 0, 2, 2)
        setups = [(Rect.anchored(0, 0, 4, 2), Isometry.reflection_x(3)),
                  (Rect.anchored(0, 0, 2, 4), Isometry.reflection_y(3))]
        worst = math.inf
        for torus, tau in setups:
            ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
            size = 1 << len(R.edges())
            for _ in range(self.sizes["rp_draws"]):
                f = LocalObservable(R, rng.choice([-1.0, 1.0], size=size))
                worst = min(worst, rp_check(f, R, torus, tau, p, ensemble))
        return {"success": worst >= -RP_TOL, "min_value": worst}

    def _chessboard_families(self, rng, R, torus, k, n_families, ensemble, p):
        group = block_transforms(R, torus)
        size = 1 << (k * len(R.edges()))
        failures = []
        for _ in range(n_families):
            chosen = rng.choice(len(group), size=rng.integers(1, min(4, len(group)) + 1), replace=False)
            events = {group[c]: EventPredicate(R, rng.random(size) < 0.6, k) for c in chosen}
            lhs, rhs = chessboard_check(events, R, torus, p, k, ensemble)
            if lhs > rhs * (1.0 + CHESSBOARD_RTOL):
                failures.append((lhs, rhs))
        return failures

    def check_chessboard(self):
        rng = np.random.default_rng(self.seed + 2)
        p = ModelParams(1.0, 0.0, 1.0)
        R = Rect.anchored(0, 0, 1, 1)
        failures = []
        if self.sizes["cb_families_4"]:
            torus = Rect.anchored(0, 0, 4, 4)
            ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
            failures += self._chessboard_families(rng, R, torus, 1, self.sizes["cb_families_4"], ensemble, p)
        torus = Rect.anchored(0, 0, 2, 2)
        ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
        failures += self._chessboard_families(rng, R, torus, 2, self.sizes["cb_families_2"], ensemble, p)
        return {"success": not failures, "failures": failures}

    # ==================== Sampler ====================

    def check_detailed_balance(self):
        p = ModelParams(1.0, 0.0, 1.0)
        torus = Rect.anchored(0, 0, 2, 2)
        ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
        configs = list(ensemble.configs())
        worst = 0.0
        pairs = 0
        for i, j in itertools.combinations(range(len(configs)), 2):
            if int((ensemble.occ[i] != ensemble.occ[j]).sum()) != 1:
                continue
            forward = math.exp(ensemble.log_w[i]) * transition_probability(configs[i], configs[j], p)
            backward = math.exp(ensemble.log_w[j]) * transition_probability(configs[j], configs[i], p)
            worst = max(worst, _rel(forward, backward))
            pairs += 1
        return {"success": pairs > 0 and worst <= BALANCE_RTOL, "pairs": pairs, "max_rel_error": worst}

    def check_sampler_means(self):
        p = ModelParams(1.0, 0.0, 1.0)
        torus = Rect.anchored(0, 0, 4, 4)
        ensemble = ConfigEnsemble(torus, BoundaryCondition.periodic(), p)
        exact_dimers = ensemble.expectation(ensemble.occ.sum(axis=1))
        exact_broken = ensemble.expectation(ensemble.n_broken)
        sweeps = self.sizes["sampler_sweeps"]
        spec = ChainSpec(torus, p, self.seed, sweeps, burn_in=1000, measure_every=10)
        record = run(spec)
        summary = record.summary()
        series = record.series("n_horizontal") + record.series("n_vertical")
        tau = integrated_autocorr_time(series)
        dimers = float(series.mean())
        se_dimers = float(series.std(ddof=1) / math.sqrt(len(series) / tau))
        se_broken = summary["n_broken"]["stderr"]
        z_dimers = abs(dimers - exact_dimers) / se_dimers
        z_broken = abs(summary["n_broken"]["mean"] - exact_broken) / se_broken
        return {"success": z_dimers <= 3.0 and z_broken <= 3.0, "exact_dimers": exact_dimers,
                "sampled_dimers": dimers, "exact_broken": exact_broken,
                "sampled_broken": summary["n_broken"]["mean"], "z_dimers": z_dimers, "z_broken": z_broken}

    # ==================== Combinatorics ====================

    def check_config_graphs(self):
        p = ModelParams(1.0, 0.0, 1.0)
        counts = {"configs": 0, "weight": 0, "bound": 0, "chasing": 0, "compression": 0, "sticks": 0}
        for K, L in self.sizes["windows"]:
            window = Rect.anchored(0, 0, K, L)
            for cfg in enumerate_configs(window, BoundaryCondition.vacant()):
                counts["configs"] += 1
                G = ConfigGraph(cfg)
                expected = 4 * p.log_vacancy_weight + log_weight(cfg, window, p)
                if abs(G.log_weight(p) - expected) > LOG_WEIGHT_TOL:
                    counts["weight"] += 1
                parts = sub_component_sets(G)
                if cfg.dimer_count() and not component_bound_check(G, parts):
                    counts["bound"] += 1
                if defect_chasing_violations(G, parts):
                    counts["chasing"] += 1
                if compress(G).counts != parts.as_tuple():
                    counts["compression"] += 1
                for M in STICK_BOUNDS:
                    if in_EM(cfg, M) and not defect_lower_bound_check(G, M):
                        counts["sticks"] += 1
        violations = sum(v for k, v in counts.items() if k != "configs")
        return {"success": violations == 0, **counts}

    def _torus_configs(self):
        torus = Rect.anchored(0, 0, 4, 4)
        stream = enumerate_configs(torus, BoundaryCondition.periodic())
        limit = self.sizes["torus_configs"]
        return itertools.islice(stream, limit) if limit else stream

    def _psi_violations(self, cfg, K, L, N):
        ver = psi_grid(cfg, K, L, N, VERTICAL)
        hor = psi_grid(cfg, K, L, N, HORIZONTAL)
        return len(ver.points & hor.points) + len(box_adjacent_pairs(ver, hor))

    def check_enumerated_sticks(self):
        crossings = adjacency = n = 0
        for K, L in self.sizes["windows"]:
            for cfg in enumerate_configs(Rect.anchored(0, 0, K, L), BoundaryCondition.vacant()):
                crossings += len(stick_conflicts(cfg, cfg.window.padded(1)))
                n += 1
        for cfg in self._torus_configs():
            crossings += len(stick_conflicts(cfg))
            adjacency += self._psi_violations(cfg, 1, 1, 4)
            n += 1
        return {"success": crossings == 0 and adjacency == 0, "configs": n,
                "stick_crossings": crossings, "psi_adjacent": adjacency}

    # ==================== Sampled nematic checks ====================

    def _nematic_spec(self, beta, size=None, chain_index=0, snapshots=0):
        size = size or self.sizes["nematic_size"]
        torus = Rect.anchored(0, 0, size, size)
        sweeps = self.sizes["nematic_sweeps"]
        every = max(1, sweeps // snapshots) if snapshots else 0
        return ChainSpec(torus, ModelParams(beta, 0.0, 1.0), self.seed, sweeps, burn_in=sweeps // 4,
                         measure_every=10, init="packed_vertical", chain_index=chain_index,
                         snapshot_every=every)

    def _stick_spec(self, c):
        sweeps = self.sizes["stick_sweeps"]
        return ChainSpec(Rect.anchored(0, 0, 8, 8), ModelParams(STICK_BETAS[c % len(STICK_BETAS)], 0.0, 1.0),
                         self.seed, sweeps, burn_in=sweeps // 8, measure_every=2, snapshot_every=2,
                         chain_index=c, init="packed_vertical" if (c // len(STICK_BETAS)) % 2 else "empty")

    def check_sampled_sticks(self):
        """Long chains cycling through STICK_BETAS, snapshots thinned by each chain's autocorrelation time"""
        target = self.sizes["sampled_configs"]
        crossings = adjacency = n = c = 0
        spacings = []
        while n < target:
            specs = [self._stick_spec(k) for k in range(c, c + max(len(STICK_BETAS), self.threads))]
            c += len(specs)
            for record in run_chains(specs, self.threads):
                kept, spacing = thinned_snapshots(record)
                spacings.append(spacing)
                for cfg in kept[:target - n]:
                    crossings += len(stick_conflicts(cfg))
                    adjacency += self._psi_violations(cfg, 1, 1, 4) + self._psi_violations(cfg, 2, 2, 4)
                    n += 1
        return {"success": crossings == 0 and adjacency == 0, "configs": n, "chains": c,
                "max_spacing": max(spacings), "stick_crossings": crossings, "psi_adjacent": adjacency}

    def check_confinement(self):
        violations = []
        constructed = confinement_examples()
        for pair, anchor, scales in constructed:
            violations += confinement_check(pair, anchor, scales)
        spec = self._nematic_spec(6.0)
        scales = SealScales.for_model(spec.params, 1, 1.0, 4, spec.torus.L)
        pairs, spacings = sample_pairs_spaced(spec, self.sizes["pairs"], self.threads)
        sealed_count = 0
        for sigma, sigma_prime in pairs:
            pair = PairSample(sigma, sigma_prime)
            for row in sealed_grid(pair, scales):
                if row["sealed"]:
                    sealed_count += 1
                    violations += confinement_check(pair, (row["anchor_x"], row["anchor_y"]), scales)
        return {"success": not violations and len(pairs) == self.sizes["pairs"], "violations": len(violations),
                "pairs": len(pairs), "chain_pairs": len(spacings), "max_spacing": max(spacings),
                "sealed_anchors": sealed_count, "constructed_examples": len(constructed)}

    def check_nematic_order(self):
        betas = (4.0, 5.0, 6.0)
        specs = [self._nematic_spec(beta, chain_index=k, snapshots=self.sizes["nematic_snapshots"])
                 for k, beta in enumerate(betas)]
        records = run_chains(specs, self.threads)
        area = float(specs[0].torus.K * specs[0].torus.L)
        horizontal = [float(np.mean([block_horizontal_density(cfg, r.spec.params) for cfg in r.snapshots]))
                      for r in records]
        vertical = [float(r.series("n_vertical").mean()) / area for r in records]
        ordered = all(h1 > h2 for h1, h2 in zip(horizontal, horizontal[1:]))
        snapshots = records[-1].snapshots
        spanning = {}
        spans_hor = 0
        for b in self.b_values:
            spans_ver = 0
            for cfg in snapshots:
                ver = percolation_report(psi_grid(cfg, b, b, 4, VERTICAL))
                hor = percolation_report(psi_grid(cfg, b, b, 4, HORIZONTAL))
                spans_ver += ver["spans_horizontally"] and ver["spans_vertically"]
                spans_hor += hor["spans_horizontally"] or hor["spans_vertically"]
            spanning[str(b)] = spans_ver / float(len(snapshots)) if snapshots else 0.0
        success = (vertical[-1] > 0.45 and horizontal[-1] < 0.02 and ordered
                   and all(f >= 0.95 for f in spanning.values()) and spans_hor == 0)
        return {"success": success, "betas": list(betas), "vertical_density": vertical,
                "horizontal_density": horizontal, "psi_ver_spanning": spanning, "psi_hor_spanning": spans_hor}


# ==================== Constructed examples ====================

def packed_pair(W, H):
    torus = Rect.anchored(0, 0, W, H)
    return DimerConfig.packed(torus, "vertical"), DimerConfig.packed(torus, "vertical")


def column_offset_pair(W=12, H=32, column=5, rows=(8, 15)):
    """
    Packed vertical pair where sigma' shifts the dimers of one column by one
    between the given rows, leaving vacancies at both ends.
    """
    sigma, sigma_prime = packed_pair(W, H)
    lo, hi = rows
    for y in range(lo, hi + 1):
        sigma_prime.set_edge(EdgeId(2 * column, 2 * y + 1), False)
    for y in range(lo + 1, hi - 1, 2):
        sigma_prime.set_edge(EdgeId(2 * column, 2 * y + 1), True)
    return PairSample(sigma, sigma_prime)


def confinement_examples():
    """(pair, anchor, scales) triples whose sealed rectangles hold by construction"""
    scales = SealScales(1, 2, 4)
    sigma, sigma_prime = packed_pair(12, 32)
    return [
        (PairSample(sigma, sigma_prime), (4, 8), scales),
        (column_offset_pair(), (4, 8), scales),
    ]


# دوال مساعدة للاستدعاء المباشر
def run_suite(suite="all", seed=20240, scale="full", threads=1, b_values=None):
    return VerificationSuite(seed, scale, threads, b_values).run(suite)


def suite_passed(results):
    return all(r["success"] for r in results)


def format_report(results):
    """جدول النتائج - One PASS/FAIL line per stage with its headline numbers"""
    lines = []
    for r in results:
        status = "PASS" if r["success"] else "FAIL"
        detail = r.get("error") or ", ".join(
            f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
            for k, v in r.items() if k not in ("name", "success") and not isinstance(v, (list, tuple, dict)))
        lines.append(f"{status}  {r['name']:<30} {detail}")
    return "\n".join(lines)
