"""Experiment harness: configs, matched-batch runs, verification, reports.

An experiment config is one JSON file (human-readable key/value with
nesting; unknown keys are errors):

    {
      "budget": 1.0,                 // total privacy budget mu0 (required)
      "n_trials": 200000,            // trials per arm (required)
      "bits": [0, 1],                // secret bits to exercise
      "master_seed": 42,
      "max_rounds": 256,
      "alpha": 0.001,                // per-test significance level
      "min_test_samples": 10000,     // both arms need this many values per test
      "policies": [ {"name": "fixed", "spends": [0.6, 0.8]}, ... ],
      "mechanisms": [ {"name": "threshold", "mu": 1.0, "tau": 0.5}, ... ]
    }

For every (policy, bit), ``run_experiment`` runs n_trials direct and
n_trials simulated interactions on disjoint derived streams (policy arms and
mechanism arms are keyed separately; see gdpsim.rng for the splitting rule),
then evaluates per-round marginal KS tests, the policy summary KS test,
moment and covariance bounds where round shapes are uniform, and
refusal-pattern checksums.  Rounds with fewer than min_test_samples values
in either arm are reported as "insufficient sample" rather than tested,
keeping the asymptotic p-values honest.  A failing (policy, bit) section is
rerun once on an independently derived seed before the failure stands.

Reports are JSON with sorted keys.  The checksum covers the config echo and
results only -- wall time, timestamps and versions live in a separate
metadata block -- so two runs with the same (config, master_seed) are
checksum-identical.  ``report_table`` renders the same results as a flat TSV
for spreadsheets.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .adversaries import make_policy
from .batch import run_trial_batch, policy_stream_id
from .budget import check_budget
from .cholesky import dense_state, next_noise, streaming_state
from .curator import Round, Transcript
from .errors import ConfigError, NumericalIntegrityError
from .mechanisms import make_mechanism
from .rng import derive_key, generator
from .stats import (
    TestReport,
    empirical_moments,
    covariance_deviation,
    ks_two_sample,
    normality_check,
    two_proportion_z,
)

_REPORT_SCHEMA = "gdpsim.report.v1"

# Bound checks on moments, in units of 1/sqrt(n_trials).  ~6.4 sigma and up:
# effectively never false-failing, so they sit outside the alpha budget.
_MEAN_TOL_FACTOR = 6.7
_COV_TOL_FACTOR = 9.0


# --- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    budget: float
    n_trials: int
    bits: tuple = (0, 1)
    policies: tuple = ()      # ((name, params dict), ...)
    mechanisms: tuple = ()    # ((name, mu, params dict), ...)
    max_rounds: int = 256
    master_seed: int = 0
    alpha: float = 0.001
    min_test_samples: int = 10000


_TOP_KEYS = {
    "budget", "n_trials", "bits", "policies", "mechanisms",
    "max_rounds", "master_seed", "alpha", "min_test_samples",
}


def with_seed(config: ExperimentConfig, master_seed: int) -> ExperimentConfig:
    return replace(config, master_seed=int(master_seed))


def config_from_dict(data: dict, source: str = "<dict>") -> ExperimentConfig:
    """Validate a raw config mapping; unknown keys are errors (fail closed)."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: config root must be an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    for key in ("budget", "n_trials"):
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")

    def fail(field, msg):
        raise ConfigError(f"{source}: {field}: {msg}")

    try:
        budget = check_budget(data["budget"])
    except (TypeError, ValueError) as exc:
        fail("budget", exc)
    n_trials = data["n_trials"]
    if not isinstance(n_trials, int) or n_trials < 1:
        fail("n_trials", f"must be a positive integer, got {n_trials!r}")
    bits = data.get("bits", [0, 1])
    if (not isinstance(bits, list) or not bits or len(set(bits)) != len(bits)
            or any(b not in (0, 1) for b in bits)):
        fail("bits", f"must be a nonempty subset of [0, 1], got {bits!r}")
    max_rounds = data.get("max_rounds", 256)
    if not isinstance(max_rounds, int) or max_rounds < 1:
        fail("max_rounds", f"must be a positive integer, got {max_rounds!r}")
    master_seed = data.get("master_seed", 0)
    if not isinstance(master_seed, int):
        fail("master_seed", f"must be an integer, got {master_seed!r}")
    alpha = data.get("alpha", 0.001)
    if not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
        fail("alpha", f"must lie in (0, 1), got {alpha!r}")
    min_test_samples = data.get("min_test_samples", 10000)
    if not isinstance(min_test_samples, int) or min_test_samples < 2:
        fail("min_test_samples", f"must be an integer >= 2, got {min_test_samples!r}")

    policies = []
    for i, entry in enumerate(data.get("policies", [])):
        field = f"policies[{i}]"
        if not isinstance(entry, dict) or "name" not in entry:
            fail(field, "must be an object with a 'name' key")
        params = {k: v for k, v in entry.items() if k != "name"}
        try:
            make_policy(entry["name"], **params)
        except (TypeError, ValueError) as exc:
            fail(field, exc)
        policies.append((entry["name"], params))

    mechanisms = []
    for i, entry in enumerate(data.get("mechanisms", [])):
        field = f"mechanisms[{i}]"
        if not isinstance(entry, dict) or "name" not in entry or "mu" not in entry:
            fail(field, "must be an object with 'name' and 'mu' keys")
        params = {k: v for k, v in entry.items() if k not in ("name", "mu")}
        try:
            make_mechanism(entry["name"], entry["mu"], **params)
        except (TypeError, ValueError) as exc:
            fail(field, exc)
        mechanisms.append((entry["name"], float(entry["mu"]), params))

    return ExperimentConfig(
        budget=budget,
        n_trials=n_trials,
        bits=tuple(bits),
        policies=tuple(policies),
        mechanisms=tuple(mechanisms),
        max_rounds=max_rounds,
        master_seed=master_seed,
        alpha=float(alpha),
        min_test_samples=min_test_samples,
    )


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON config file, with line/field diagnostics."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(data, source=str(path))


def _config_echo(config: ExperimentConfig) -> dict:
    return {
        "budget": config.budget,
        "n_trials": config.n_trials,
        "bits": list(config.bits),
        "policies": [{"name": n, "params": p} for n, p in config.policies],
        "mechanisms": [
            {"name": n, "mu": mu, "params": p} for n, mu, p in config.mechanisms
        ],
        "max_rounds": config.max_rounds,
        "master_seed": config.master_seed,
        "alpha": config.alpha,
        "min_test_samples": config.min_test_samples,
    }


# --- evaluation of one (policy, bit) pair ----------------------------------

def _finite_or_none(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _mean_of(x: np.ndarray) -> float | None:
    return _finite_or_none(x.mean()) if x.size else None


def _var_of(x: np.ndarray) -> float | None:
    return _finite_or_none(x.var(ddof=1)) if x.size >= 2 else None


def _uniform_shape(res) -> bool:
    """True when all trials share the same rounds, spends and decisions."""
    if res.answers.shape[1] == 0 or res.n_trials == 0:
        return False
    if int(res.lengths.min()) != int(res.lengths.max()):
        return False
    if np.any(res.decisions == -1):
        return False
    if np.any(res.decisions != res.decisions[0:1, :]):
        return False
    if np.any(res.spends != res.spends[0:1, :]):
        return False
    return True


def _refusal_checksum(res, width: int) -> str:
    rows = res.refusal_rows()
    if rows.shape[1] < width:
        pad = np.zeros((rows.shape[0], width - rows.shape[1]), dtype=bool)
        rows = np.concatenate([rows, pad], axis=1)
    patterns, counts = np.unique(rows.astype(np.uint8), axis=0, return_counts=True)
    h = hashlib.sha256()
    h.update(patterns.tobytes())
    h.update(counts.astype(np.int64).tobytes())
    h.update(str(width).encode())
    return h.hexdigest()


def _evaluate_pair(direct, sim, alpha: float, min_samples: int) -> dict:
    n = direct.n_trials
    r_direct = direct.answers.shape[1]
    r_sim = sim.answers.shape[1]
    r_max = max(r_direct, r_sim)
    ok = True
    tests_run = 0

    per_round = []
    for r in range(r_max):
        xd = direct.round_answers(r) if r < r_direct else np.empty(0)
        xs = sim.round_answers(r) if r < r_sim else np.empty(0)
        entry = {
            "round": r,
            "n_direct": int(xd.size),
            "n_simulated": int(xs.size),
            "mean_direct": _mean_of(xd),
            "mean_simulated": _mean_of(xs),
            "var_direct": _var_of(xd),
            "var_simulated": _var_of(xs),
        }
        if min(xd.size, xs.size) >= max(2, min_samples):
            rep = ks_two_sample(xd, xs, alpha, name=f"round_{r}_ks")
            entry["ks"] = rep.to_dict()
            ok &= rep.passed
            tests_run += 1
        else:
            entry["ks"] = "insufficient sample"
        per_round.append(entry)

    if n >= max(2, min_samples):
        rep = ks_two_sample(direct.summaries(), sim.summaries(), alpha, name="summary_ks")
        summary = rep.to_dict()
        ok &= rep.passed
        tests_run += 1
    else:
        summary = "insufficient sample"

    uniform = _uniform_shape(direct) and _uniform_shape(sim) \
        and direct.decisions.shape == sim.decisions.shape \
        and bool(np.all(direct.decisions[0] == sim.decisions[0])) \
        and bool(np.all(direct.spends[0] == sim.spends[0]))
    if uniform and n >= 2:
        acc_cols = np.flatnonzero(direct.decisions[0] == 1)
        if acc_cols.size:
            mean_tol = _MEAN_TOL_FACTOR / math.sqrt(n)
            cov_tol = _COV_TOL_FACTOR / math.sqrt(n)
            targets = direct.bit * direct.spends[0, acc_cols]
            eye = np.eye(acc_cols.size)
            mean_d, cov_d = empirical_moments(direct.answers[:, acc_cols])
            mean_s, cov_s = empirical_moments(sim.answers[:, acc_cols])
            mean_dev = max(
                float(np.max(np.abs(mean_d - targets))),
                float(np.max(np.abs(mean_s - targets))),
            )
            moments = {
                "accepted_rounds": [int(c) for c in acc_cols],
                "mean_targets": [float(t) for t in targets],
                "mean_direct": [float(v) for v in mean_d],
                "mean_simulated": [float(v) for v in mean_s],
                "mean_tolerance": mean_tol,
                "mean_max_deviation": mean_dev,
                "mean_ok": mean_dev <= mean_tol,
                "cov_deviation_direct_vs_identity": covariance_deviation(cov_d, eye),
                "cov_deviation_simulated_vs_identity": covariance_deviation(cov_s, eye),
                "cov_deviation_between_arms": covariance_deviation(cov_d, cov_s),
                "cov_tolerance": cov_tol,
            }
            moments["cov_ok"] = (
                moments["cov_deviation_direct_vs_identity"] <= cov_tol
                and moments["cov_deviation_simulated_vs_identity"] <= cov_tol
            )
            ok &= moments["mean_ok"] and moments["cov_ok"]
        else:
            moments = "no accepted rounds"
    else:
        moments = "skipped (adaptive round shape)" if not uniform else "insufficient trials"

    width = max(direct.refusal_rows().shape[1], sim.refusal_rows().shape[1])
    ck_d = _refusal_checksum(direct, width)
    ck_s = _refusal_checksum(sim, width)
    refusals = {
        "checksum_direct": ck_d,
        "checksum_simulated": ck_s,
        "match": ck_d == ck_s,
        "refused_rounds_direct": int(np.sum(direct.decisions == 0)),
        "refused_rounds_simulated": int(np.sum(sim.decisions == 0)),
    }
    ok &= refusals["match"]

    return {
        "n_trials": n,
        "rounds": r_max,
        "per_round": per_round,
        "summary_ks": summary,
        "moments": moments,
        "refusals": refusals,
        "truncated_direct": int(np.sum(direct.truncated)),
        "truncated_simulated": int(np.sum(sim.truncated)),
        "tests_run": tests_run,
        "passed": bool(ok),
    }


def _policy_section(config, name, params, bit, seed, engine) -> dict:
    direct = run_trial_batch(
        "direct", bit, config.budget, name, params,
        config.n_trials, seed, config.max_rounds, engine,
    )
    sim = run_trial_batch(
        "simulated", bit, config.budget, name, params,
        config.n_trials, seed, config.max_rounds, engine,
    )
    section = {"policy": name, "params": params, "bit": bit}
    section.update(_evaluate_pair(direct, sim, config.alpha, config.min_test_samples))
    return section


# --- mechanisms -------------------------------------------------------------

def _mechanism_outcomes(res, mech, post_rng) -> np.ndarray:
    if res.answers.shape[1] == 0:
        return np.empty(0)
    accepted = res.decisions[:, 0] == 1
    core = res.answers[accepted, 0]
    if mech.vector_post is not None:
        return np.asarray(mech.vector_post(core, post_rng), dtype=float)
    return np.array([mech.post(v, post_rng) for v in core], dtype=float)


def _mechanism_section(config, name, mu, params, bit, seed, engine) -> dict:
    mech = make_mechanism(name, mu, **params)
    label = "mechanism:" + policy_stream_id(name, {"mu": mu, **params})
    arms = {}
    for kind in ("direct", "simulated"):
        arms[kind] = run_trial_batch(
            kind, bit, config.budget, "fixed", {"spends": [mu]},
            config.n_trials, seed, config.max_rounds, engine, stream_label=label,
        )
    out_d = _mechanism_outcomes(arms["direct"], mech,
                                generator(seed, "post", label, "direct", bit))
    out_s = _mechanism_outcomes(arms["simulated"], mech,
                                generator(seed, "post", label, "simulated", bit))
    refused_d = config.n_trials - out_d.size
    refused_s = config.n_trials - out_s.size
    section = {
        "mechanism": name,
        "mu": mu,
        "params": params,
        "bit": bit,
        "n_trials": config.n_trials,
        "refused_direct": refused_d,
        "refused_simulated": refused_s,
        "binary": mech.binary,
    }
    ok = refused_d == refused_s
    if out_d.size == 0 or out_s.size == 0:
        section["test"] = "all queries refused"
    elif mech.binary:
        success = float(max(np.max(out_d), np.max(out_s)))
        k_d = int(np.sum(out_d == success))
        k_s = int(np.sum(out_s == success))
        section["success_value"] = success
        section["freq_direct"] = k_d / out_d.size
        section["freq_simulated"] = k_s / out_s.size
        rep = two_proportion_z(k_d, out_d.size, k_s, out_s.size, config.alpha,
                               name=f"{name}_two_proportion")
        section["test"] = rep.to_dict()
        ok &= rep.passed
    elif min(out_d.size, out_s.size) >= max(2, config.min_test_samples):
        rep = ks_two_sample(out_d, out_s, config.alpha, name=f"{name}_ks")
        section["test"] = rep.to_dict()
        ok &= rep.passed
    else:
        section["test"] = "insufficient sample"
    section["passed"] = bool(ok)
    return section


# --- experiment driver ------------------------------------------------------

@dataclass
class ExperimentReport:
    passed: bool
    results: dict
    metadata: dict
    checksum: str

    def to_json(self) -> str:
        payload = {
            "checksum": self.checksum,
            "results": self.results,
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


def _canonical_checksum(results: dict) -> str:
    blob = json.dumps(results, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_experiment(config: ExperimentConfig, engine: str = "vector") -> ExperimentReport:
    """Run the matched direct/simulated batches for every configured policy,
    bit and mechanism, evaluate all tests, and assemble the report."""
    t0 = time.perf_counter()
    results = {
        "schema": _REPORT_SCHEMA,
        "config": _config_echo(config),
        "policies": [],
        "mechanisms": [],
        "rng": {},
    }
    overall = True
    retry_seed = derive_key(config.master_seed, "retry")

    for name, params in config.policies:
        for bit in config.bits:
            section = _policy_section(config, name, params, bit,
                                      config.master_seed, engine)
            if not section["passed"]:
                retry = _policy_section(config, name, params, bit, retry_seed, engine)
                section["retry"] = retry
                section["passed_after_retry"] = retry["passed"]
                overall &= retry["passed"]
            results["policies"].append(section)

    for name, mu, params in config.mechanisms:
        for bit in config.bits:
            section = _mechanism_section(config, name, mu, params, bit,
                                         config.master_seed, engine)
            if not section["passed"]:
                retry = _mechanism_section(config, name, mu, params, bit,
                                           retry_seed, engine)
                section["retry"] = retry
                section["passed_after_retry"] = retry["passed"]
                overall &= retry["passed"]
            results["mechanisms"].append(section)

    normality = normality_check(
        generator(config.master_seed, "normality").standard_normal(100000),
        config.alpha,
    )
    results["rng"]["normality"] = normality.to_dict()
    overall &= normality.passed
    results["passed"] = bool(overall)

    checksum = _canonical_checksum(results)
    metadata = {
        "wall_time_seconds": time.perf_counter() - t0,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "engine": engine,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "gdpsim": "0.1.0",
        },
    }
    return ExperimentReport(bool(overall), results, metadata, checksum)


def report_table(results: dict) -> str:
    """Flat TSV rendering of a results dict, for spreadsheet use."""
    header = ["section", "name", "bit", "round", "n_direct", "n_simulated",
              "mean_direct", "mean_simulated", "statistic", "p_value", "status"]

    def fmt(x):
        if x is None:
            return ""
        if isinstance(x, float):
            return f"{x:.6g}"
        return str(x)

    def test_cells(t):
        if isinstance(t, dict):
            return [fmt(t["statistic"]), fmt(t["p_value"]),
                    "pass" if t["passed"] else "FAIL"]
        return ["", "", str(t)]

    lines = ["\t".join(header)]
    for sec in results.get("policies", []):
        base = ["policy", sec["policy"], str(sec["bit"])]
        for ent in sec["per_round"]:
            row = base + [str(ent["round"]), str(ent["n_direct"]),
                          str(ent["n_simulated"]), fmt(ent["mean_direct"]),
                          fmt(ent["mean_simulated"])] + test_cells(ent["ks"])
            lines.append("\t".join(row))
        lines.append("\t".join(base + ["summary", "", "", "", ""]
                               + test_cells(sec["summary_ks"])))
        lines.append("\t".join(base + ["refusals", "", "", "", "", "", "",
                                       "match" if sec["refusals"]["match"] else "MISMATCH"]))
    for sec in results.get("mechanisms", []):
        row = (["mechanism", sec["mechanism"], str(sec["bit"]), "0",
                str(sec["n_trials"] - sec["refused_direct"]),
                str(sec["n_trials"] - sec["refused_simulated"]),
                fmt(sec.get("freq_direct")), fmt(sec.get("freq_simulated"))]
               + test_cells(sec["test"]))
        lines.append("\t".join(row))
    norm = results.get("rng", {}).get("normality")
    if norm:
        lines.append("\t".join(["rng", "normality", "", "", "", "", "", ""]
                               + test_cells(norm)))
    lines.append("\t".join(["overall", "", "", "", "", "", "", "", "", "",
                            "pass" if results.get("passed") else "FAIL"]))
    return "\n".join(lines) + "\n"


# --- factor verification ----------------------------------------------------

def canonical_cholesky_oracle(sigma, zero_tol: float = 1e-12) -> np.ndarray:
    """Canonical Cholesky factor of an explicit PSD matrix.

    Right-looking factorization; pivots within zero_tol of zero produce an
    all-zero column, which is the canonical convention for rank-deficient
    input.  Independent of the incremental construction it is used to check.
    """
    a = np.asarray(sigma, dtype=float)
    n = a.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d2 = a[j, j] - L[j, :j] @ L[j, :j]
        if d2 <= zero_tol:
            if d2 < -1e-8:
                raise NumericalIntegrityError(f"pivot {j} is negative: {d2}")
            continue
        L[j, j] = math.sqrt(d2)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _exact_exhaustion_spends(rng, max_len: int) -> np.ndarray:
    # Decompose 1024 into perfect squares; spends j/32 then have exactly
    # representable squares j^2/1024 whose float sum hits 1.0 exactly.
    remaining = 1024
    parts = []
    while remaining > 0:
        jmax = math.isqrt(remaining)
        if len(parts) >= max_len - 8:
            j = jmax
        else:
            j = int(rng.integers(1, jmax + 1))
        parts.append(j)
        remaining -= j * j
    spends = np.array(parts, dtype=float) / 32.0
    rng.shuffle(spends)
    tail = int(rng.integers(0, min(4, max(1, max_len - len(parts)))))
    if tail:
        spends = np.concatenate([spends, np.zeros(tail)])
    return spends


def random_admissible_spends(rng, exhaust: bool, max_len: int = 64) -> np.ndarray:
    """One random normalized spend vector with ||m|| <= 1; ``exhaust`` forces
    an exactly unit norm (followed by a short zero tail)."""
    if exhaust:
        return _exact_exhaustion_spends(rng, max_len)
    n = int(rng.integers(1, max_len + 1))
    g = np.abs(rng.standard_normal(n)) + 1e-3
    u = float(rng.uniform(0.05, 0.99))
    return g * (math.sqrt(u) / float(np.linalg.norm(g)))


@dataclass(frozen=True)
class CholeskyVerification:
    cases: int
    exhaustion_cases: int
    max_factor_deviation: float
    max_streaming_deviation: float
    max_canonical_deviation: float
    canonical_failures: int
    factor: TestReport
    streaming: TestReport
    passed: bool


def verify_cholesky(seed: int = 0, cases: int = 1000, max_len: int = 64,
                    factor_tol: float = 1e-10, noise_tol: float = 1e-9) -> CholeskyVerification:
    """Random-suite check of the incremental factor against an explicit-matrix
    oracle, and of the streaming noise recurrences against dense mode.

    Case 0 is pinned to the rank-deficient exhaustion (0.6, 0.8) and case 1
    to the empty vector; afterwards every tenth case exhausts the budget
    exactly, so a 1000-case run includes 100 boundary cases.
    """
    if cases < 1:
        raise ValueError("cases must be at least 1")
    max_factor = 0.0
    max_stream = 0.0
    max_canon = 0.0
    canon_failures = 0
    exhaust_count = 0
    for case in range(cases):
        rng = generator(seed, "cholesky-verify", case)
        if case == 0:
            exhaust = True
            m = np.array([0.6, 0.8])
        elif case == 1:
            exhaust = False
            m = np.empty(0)
        else:
            exhaust = case % 10 == 0
            m = random_admissible_spends(rng, exhaust, max_len)
        exhaust_count += int(exhaust)
        seeds = rng.standard_normal(m.size)
        dense = dense_state()
        stream = streaming_state()
        past = []
        for i, mi in enumerate(m):
            u_dense, dense = next_noise(dense, float(mi), float(seeds[i]), past)
            u_stream, stream = next_noise(stream, float(mi), float(seeds[i]))
            max_stream = max(max_stream, abs(u_dense - u_stream))
            past.append(float(seeds[i]))
        L = dense.matrix()
        sigma = np.eye(m.size) - np.outer(m, m)
        if m.size:
            max_factor = max(max_factor, float(np.max(np.abs(L @ L.T - sigma))))
            oracle = canonical_cholesky_oracle(sigma)
            max_canon = max(max_canon, float(np.max(np.abs(L - oracle))))
        diag_ok = bool(np.all(np.diag(L) >= 0.0))
        zero_cols = int(np.sum(np.all(L == 0.0, axis=0))) if m.size else 0
        expected_zero = 1 if (m.size and dense.q >= 1.0) else 0
        if not diag_ok or zero_cols != expected_zero:
            canon_failures += 1
    factor_rep = TestReport("factor_identity", max_factor, None, factor_tol,
                            max_factor <= factor_tol)
    stream_rep = TestReport("streaming_vs_dense", max_stream, None, noise_tol,
                            max_stream <= noise_tol)
    canonical_ok = canon_failures == 0 and max_canon <= 1e-8
    return CholeskyVerification(
        cases=cases,
        exhaustion_cases=exhaust_count,
        max_factor_deviation=max_factor,
        max_streaming_deviation=max_stream,
        max_canonical_deviation=max_canon,
        canonical_failures=canon_failures,
        factor=factor_rep,
        streaming=stream_rep,
        passed=factor_rep.passed and stream_rep.passed and canonical_ok,
    )


# --- transcript serialization ------------------------------------------------

_TRANSCRIPT_COLUMNS = ["policy", "bit", "kind", "trial", "budget",
                       "round", "spend", "decision", "answer"]


def write_transcripts(path, records) -> None:
    """Write labeled transcripts as one CSV row per round.

    ``records`` yields (policy, bit, kind, trial, Transcript).  Refused
    rounds carry an empty answer field; a truncated transcript gains one
    trailing row with decision "truncated".  Interactions with no rounds
    produce no rows.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRANSCRIPT_COLUMNS)
        for policy, bit, kind, trial, tr in records:
            for rnd in tr.rounds:
                writer.writerow([
                    policy, bit, kind, trial, repr(tr.budget), rnd.index,
                    repr(rnd.spend),
                    "accepted" if rnd.accepted else "refused",
                    "" if rnd.answer is None else repr(rnd.answer),
                ])
            if tr.truncated:
                writer.writerow([policy, bit, kind, trial, repr(tr.budget),
                                 len(tr.rounds), "", "truncated", ""])


def parse_transcripts(path) -> dict:
    """Inverse of write_transcripts: {(policy, bit, kind, trial): Transcript}."""
    out: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _TRANSCRIPT_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(_TRANSCRIPT_COLUMNS):
                raise ValueError(f"{path}:{line}: expected {len(_TRANSCRIPT_COLUMNS)} fields")
            policy, bit, kind, trial, budget, rnd, spend, decision, answer = row
            key = (policy, int(bit), kind, int(trial))
            tr = out.get(key)
            if tr is None:
                tr = out[key] = Transcript(budget=float(budget))
            if decision == "truncated":
                tr.truncated = True
                continue
            if decision not in ("accepted", "refused"):
                raise ValueError(f"{path}:{line}: unknown decision {decision!r}")
            accepted = decision == "accepted"
            if accepted == (answer == ""):
                raise ValueError(f"{path}:{line}: answer presence contradicts decision")
            tr.rounds.append(Round(
                int(rnd), float(spend), accepted,
                float(answer) if accepted else None,
            ))
    return out


def emit_transcripts(config: ExperimentConfig, path,
                     kinds=("direct", "simulated"), engine: str = "vector"):
    """Run the configured arms and write every transcript to ``path``."""
    records = []
    for name, params in config.policies:
        label = policy_stream_id(name, params)
        for bit in config.bits:
            for kind in kinds:
                res = run_trial_batch(
                    kind, bit, config.budget, name, params,
                    config.n_trials, config.master_seed, config.max_rounds, engine,
                )
                for t, tr in enumerate(res.transcripts()):
                    records.append((label, bit, kind, t, tr))
    write_transcripts(path, records)
    return path
