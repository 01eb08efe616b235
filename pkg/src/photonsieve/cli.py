"""Command-line front end.

Reads a JSON config describing a circuit and a task, dispatches to the
library, and writes structured results (JSON, or CSV for one-dimensional
distributions). Exit codes: 0 success, 2 validation error, 3 numeric error.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from . import distributions as dist
from . import fock_channel, gaussian, heralding, phasespace
from .errors import (
    DomainError,
    LayoutMismatch,
    NumericFailure,
    PartitionMismatch,
    ValidationFailure,
)
from .hafnian import blocked_lhaf, blocked_lhaf_combinatorial
from .heralding import HeraldSpec


# ---------------------------------------------------------------------------
# JSON <-> numpy helpers
# ---------------------------------------------------------------------------

def _complex(v):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 \
            and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    raise DomainError(f"expected a number or [re, im] pair, got {v!r}")


def _matrix(rows):
    return np.array([[_complex(v) for v in row] for row in rows])


def _vector(vals):
    return np.array([_complex(v) for v in vals])


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def haar_unitary(n, seed):
    """Seeded Haar-random unitary via the QR decomposition with phase fix."""
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(h)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


# ---------------------------------------------------------------------------
# circuit construction
# ---------------------------------------------------------------------------

def _transmission(circ, total, externals):
    spec = circ.get("transmission")
    if spec is None:
        return None
    if isinstance(spec, dict):
        if "haar_seed" in spec:
            u = haar_unitary(externals, int(spec["haar_seed"]))
        else:
            u = _matrix(spec["unitary"])
        eta = float(spec.get("efficiency", 1.0))
        if not 0 <= eta <= 1:
            raise DomainError("efficiency must lie in [0, 1]")
        t = np.sqrt(eta) * u
    else:
        t = _matrix(spec)
    k = total // externals
    if t.shape == (externals, externals) and k > 1:
        t = np.kron(t, np.eye(k))  # internal modes do not mix
    if t.shape != (total, total):
        raise LayoutMismatch(
            f"transmission must be {externals}x{externals} or {total}x{total}"
        )
    return t


def build_state(circ):
    """Gaussian state described by a circuit config section."""
    modes = int(circ["modes"])
    internals = int(circ.get("internals", 1))
    layout = gaussian.ModeLayout(modes, internals)
    total = layout.total
    has_sq = "squeezing" in circ
    has_cov = "husimi_cov" in circ
    if has_sq == has_cov:
        raise PartitionMismatch(
            "exactly one of squeezing or husimi_cov must be given"
        )
    if has_cov:
        means = _vector(circ.get("means", [0.0] * (2 * total)))
        state = gaussian.GaussianState(_matrix(circ["husimi_cov"]), means,
                                       layout)
    elif "spectral_purity" in circ:
        xi = [float(x) for x in circ["squeezing"]]
        state = gaussian.impure_source(xi, float(circ["spectral_purity"]),
                                      layout)
    else:
        state = gaussian.from_squeezing(_vector(circ["squeezing"]), layout)
    t = _transmission(circ, total, modes)
    if t is not None:
        state = gaussian.apply_channel(state, t)
    if "displacements" in circ:
        state = gaussian.displace(state, _vector(circ["displacements"]))
    return state


def _measurement(task):
    m = task["measurement"]
    if isinstance(m, dict):
        return ([tuple(b) for b in m["blocks"]], tuple(m["counts"]))
    return [int(x) for x in m]


def _dm_result(dm, extra=None):
    rows = []
    for i in range(dm.entries.shape[0]):
        for j in range(dm.entries.shape[1]):
            v = dm.entries[i, j]
            if v != 0:
                rows.append([i, j, v.real, v.imag])
    out = {
        "modes": dm.modes,
        "cutoff": dm.cutoff,
        "trace": [dm.trace.real, dm.trace.imag],
        "entries": rows,
    }
    if extra:
        out.update(extra)
    return out


def _herald_target(task, dm):
    target = task.get("target")
    if target is None:
        return {}
    if isinstance(target, dict) and "fock" in target:
        vec = np.zeros(dm.entries.shape[0])
        vec[dm.index_of([int(target["fock"])] * dm.modes)] = 1.0
    else:
        vec = _vector(target)
        vec = vec / np.linalg.norm(vec)
    return {"fidelity": heralding.fidelity(dm.normalized(), vec)}


# ---------------------------------------------------------------------------
# task handlers
# ---------------------------------------------------------------------------

def _run_fine_prob(circ, task):
    rep = gaussian.to_adjacency(build_state(circ))
    return {"probability": dist.prob_fine(rep, task["pattern"])}


def _run_coarse_prob(circ, task):
    rep = gaussian.to_adjacency(build_state(circ))
    cp = dist.CoarsePattern(task["blocks"], task["counts"])
    return {"probability": dist.prob_coarse(rep, cp)}


def _run_total_dist(circ, task):
    rep = gaussian.to_adjacency(build_state(circ))
    modes = task.get("modes", list(range(rep.layout.total)))
    if "max_total" in task:
        nmax = int(task["max_total"])
        probs = np.array([dist.prob_total(rep, modes, n)
                          for n in range(nmax + 1)])
        d = dist.Distribution(np.arange(nmax + 1), np.clip(probs, 0, None),
                              max(1.0 - probs.sum(), 0.0))
    else:
        d = dist.total_distribution(rep, modes,
                                    tail=task.get("tail_bound", 1e-7))
    return {
        "support": [int(n) for n in d.support],
        "probabilities": d.probabilities.tolist(),
        "deficit": float(d.deficit),
    }


def _run_external_prob(circ, task):
    state = build_state(circ)
    rep = gaussian.to_adjacency(state)
    n = [int(x) for x in task["pattern"]]
    if task.get("distinguishable"):
        blocks = dist.extract_distinguishable_blocks(rep)
        return {"probability": dist.prob_external_distinguishable(blocks, n)}
    return {"probability": dist.prob_external(rep, n)}


def _run_herald(circ, task):
    rep = gaussian.to_adjacency(build_state(circ))
    spec = HeraldSpec(task["herald_modes"], _measurement(task),
                      int(task["cutoff"]), task.get("trace_out", ()))
    dm = heralding.herald_grouped(rep, spec)
    if task.get("normalize", True):
        out = dm.normalized()
    else:
        out = dm
    return _dm_result(out, _herald_target(task, out))


def _fock_input(circ, task):
    modes = int(circ["modes"])
    t = _transmission(circ, modes, modes)
    if t is None:
        t = np.eye(modes)
    return fock_channel.FockInput(tuple(task["input"]), t)


def _run_fock_prob(circ, task):
    fi = _fock_input(circ, task)
    cp = dist.CoarsePattern(task["blocks"], task["counts"])
    return {"probability": fock_channel.fock_coarse_prob(fi, cp)}


def _run_fock_herald(circ, task):
    fi = _fock_input(circ, task)
    spec = HeraldSpec(task["herald_modes"], _measurement(task),
                      int(task["cutoff"]), task.get("trace_out", ()))
    dm = fock_channel.fock_herald(fi, spec)
    if task.get("normalize", True):
        dm = dm.normalized()
    return _dm_result(dm, _herald_target(task, dm))


def _run_moments(circ, task):
    state = build_state(circ)
    kind = task.get("statistic", "moment")
    blocks = [list(b) for b in task["blocks"]]
    if kind == "moment":
        value = dist.coarse_moment(state, blocks)
    elif kind == "cumulant":
        value = dist.coarse_cumulant(state, blocks)
    elif kind == "block-cumulant":
        if len(blocks) != 1:
            raise PartitionMismatch("block-cumulant takes a single block")
        value = dist.block_cumulant(state, blocks[0], int(task["order"]))
    else:
        raise DomainError(f"unknown statistic {kind!r}")
    return {"value": value}


def _run_pp_estimate(circ, task, seed_override=None):
    modes = int(circ["modes"])
    if int(circ.get("internals", 1)) != 1:
        raise LayoutMismatch("phase-space estimation needs one internal mode")
    xi = [float(x) for x in circ["squeezing"]]
    t = _transmission(circ, modes, modes)
    if t is None:
        t = np.eye(modes)
    seed = seed_override if seed_override is not None else task.get("seed", 0)
    run = phasespace.PPRun(tuple(xi), t, int(task["samples"]), int(seed),
                           tuple(task["n_values"]))
    est, err = phasespace.pp_estimate(run)
    return {
        "n_values": sorted(set(int(n) for n in task["n_values"])),
        "estimates": est.tolist(),
        "standard_errors": err.tolist(),
    }


_HANDLERS = {
    "fine-prob": _run_fine_prob,
    "coarse-prob": _run_coarse_prob,
    "total-dist": _run_total_dist,
    "external-prob": _run_external_prob,
    "herald": _run_herald,
    "fock-prob": _run_fock_prob,
    "fock-herald": _run_fock_herald,
    "moments": _run_moments,
}


# ---------------------------------------------------------------------------
# benchmarking
# ---------------------------------------------------------------------------

def _time_call(fn, repetitions):
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return {"times": times, "mean": float(np.mean(times)),
            "best": float(min(times))}


def run_bench(config, seed_override=None):
    bench = config["bench"]
    reps = int(bench.get("repetitions", 3))
    if reps < 3:
        raise PartitionMismatch("bench needs at least 3 repetitions")
    kind = bench["kind"]
    circ = config.get("circuit", {})
    rows = []
    if kind == "sieve-vs-combinatorial":
        rep = gaussian.to_adjacency(build_state(circ))
        blocks = [tuple(b) for b in bench["blocks"]]
        counts = list(bench["counts"])
        rows.append({"method": "sieve", **_time_call(
            lambda: blocked_lhaf(rep.a, rep.gamma, blocks, counts), reps)})
        rows.append({"method": "combinatorial", **_time_call(
            lambda: blocked_lhaf_combinatorial(rep.a, rep.gamma, blocks,
                                               counts), reps)})
    elif kind == "exact-vs-pp":
        rep = gaussian.to_adjacency(build_state(circ))
        modes = list(range(rep.layout.total))
        n_values = [int(n) for n in bench["n_values"]]
        rows.append({"method": "exact", **_time_call(
            lambda: [dist.prob_total(rep, modes, n) for n in n_values],
            reps)})
        xi = [float(x) for x in circ["squeezing"]]
        t = _transmission(circ, rep.layout.total, int(circ["modes"]))
        seed = seed_override if seed_override is not None \
            else bench.get("seed", 0)
        run = phasespace.PPRun(
            tuple(xi), t if t is not None else np.eye(len(xi)),
            int(bench.get("samples", 10 ** 5)), int(seed), tuple(n_values))
        rows.append({"method": "positive-p", **_time_call(
            lambda: phasespace.pp_estimate(run), reps)})
    else:
        raise DomainError(f"unknown bench kind {kind!r}")
    return {"repetitions": reps, "rows": rows}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _write_output(payload, path):
    result = payload["result"]
    if path and path.endswith(".csv") and "support" in result:
        lines = ["N,probability"]
        for n, p in zip(result["support"], result["probabilities"]):
            lines.append(f"{n},{p!r}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc


def run(config, seed_override=None):
    """Dispatch a parsed config; returns the result payload."""
    task = dict(config["task"])
    kind = task.get("kind")
    if kind == "bench":
        result = run_bench(config, seed_override)
    elif kind == "pp-estimate":
        result = _run_pp_estimate(config.get("circuit", {}), task,
                                  seed_override)
    elif kind in _HANDLERS:
        result = _HANDLERS[kind](config.get("circuit", {}), task)
    else:
        raise DomainError(f"unknown task kind {kind!r}")
    return result


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="photonsieve",
        description="Photon-number statistics of lossy Gaussian circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "bench"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--output", default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                       default=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tolerance-overrides", default=None)
    args = parser.parse_args(argv)
    try:
        config = _load_json(args.config)
        if not isinstance(config, dict) or "task" not in config:
            raise DomainError("config must be an object with a task section")
        if args.tolerance_overrides:
            config.setdefault("task", {}).update(
                _load_json(args.tolerance_overrides))
        if args.command == "bench" and config["task"].get("kind") != "bench":
            raise DomainError("bench command needs a task of kind bench")
        result = run(config, seed_override=args.seed)
        payload = {
            "version": __version__,
            "config": {
                **config,
                "threads": args.threads,
                "deterministic": bool(args.deterministic),
                **({"seed": args.seed} if args.seed is not None else {}),
            },
            "result": result,
        }
        _write_output(payload, args.output)
        return 0
    except ValidationFailure as exc:
        _report_error(exc)
        return 2
    except NumericFailure as exc:
        _report_error(exc)
        return 3
    except (KeyError, TypeError, ValueError) as exc:
        _report_error(DomainError(f"bad config: {exc}"))
        return 2


def _report_error(exc):
    sys.stderr.write(json.dumps(
        {"error": type(exc).__name__, "message": str(exc)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
