"""Batch experiment harness: reproduces the benchmark figures as CSV/JSON.

Every run takes a JSON config, writes its artifacts plus a ``manifest.json``
(config echo, package version, wall time, key metrics) into the output
directory, and is bit-for-bit reproducible given the same config and seed.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, compiler, models, mps, serialize, simulator
from .circuits import circuit_from_dict, circuit_to_dict, gate_counts
from .decompose import OptimizerConfig, optimize_disentanglers
from .errors import NumericalError, ValidationError

_EXPERIMENTS = {}


def _experiment(name):
    def deco(fn):
        _EXPERIMENTS[name] = fn
        return fn

    return deco


def _require(config, keys):
    missing = [k for k in keys if k not in config]
    if missing:
        raise ValidationError(f"config missing keys: {missing}")


def _optimizer_config(config) -> OptimizerConfig:
    cfg = OptimizerConfig()
    for key in ("max_iter", "restarts", "lr", "init_high", "column_restricted", "loss_floor"):
        if key in config:
            setattr(cfg, key, config[key])
    return cfg


def _pool_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init) as pool:
        return list(pool.map(fn, items))


def _worker_init():
    try:
        import torch

        torch.set_num_threads(1)
    except ImportError:
        pass


def _simulate_and_select(circuit):
    state = simulator.run_circuit(circuit)
    if circuit.postselect_qubits:
        return simulator.post_select(
            state, circuit.postselect_qubits, [0] * len(circuit.postselect_qubits)
        )
    return state, 1.0


def verify_circuit(circuit, state_mps) -> dict:
    """Simulate, post-select, and compare against the MPS."""
    phys, prob = _simulate_and_select(circuit)
    target = mps.to_statevector(state_mps)
    if circuit.postselect_qubits:
        # success-rate identity: norm over the squared normalization factor
        predicted = mps.mps_norm(state_mps) / circuit.norm_factor**2
    else:
        predicted = 1.0
    report = {
        "fidelity": simulator.fidelity(phys, target),
        "probability_measured": prob,
        "probability_predicted": predicted,
        "gate_counts": gate_counts(circuit),
        "n_qubits": circuit.n_qubits,
    }
    return report


# ---------------------------------------------------------------------------
# experiment runners


@_experiment("canonicalize")
def _run_canonicalize(config, out_dir, rng, threads):
    _require(config, ["input"])
    with open(config["input"]) as fh:
        m = mps.mps_from_dict(json.load(fh))
    rc = mps.right_canonicalize(m)
    residual = mps.assert_right_canonical(rc, atol=1e-8)
    fid = mps.fidelity_mps(rc, m)
    serialize.dump_file(mps.mps_to_dict(rc), out_dir / "canonical_mps.json")
    return {
        "isometry_residual": residual,
        "fidelity": fid,
        "lambda": None if rc.lam is None else rc.lam.tolist(),
    }


@_experiment("compile")
def _run_compile(config, out_dir, rng, threads):
    _require(config, ["input"])
    with open(config["input"]) as fh:
        m = mps.mps_from_dict(json.load(fh))
    layers = config.get("layers")
    native = config.get("native", False)
    cfg = _optimizer_config(config)
    if m.boundary == "pbc":
        circuit = compiler.compile_pbc(
            m, layers, cfg, native, alpha=config.get("alpha", 0.5), rng=rng
        )
    else:
        circuit = compiler.compile_obc(m, layers, cfg, native, rng=rng)
    serialize.dump_file(circuit_to_dict(circuit), out_dir / "circuit.json")
    metrics = {"gate_counts": gate_counts(circuit), "n_qubits": circuit.n_qubits}
    if circuit.n_qubits <= config.get("simulate_guard", 20):
        report = verify_circuit(circuit, m)
        serialize.dump_file(report, out_dir / "verification.json")
        metrics.update(report)
    return metrics


@_experiment("verify")
def _run_verify(config, out_dir, rng, threads):
    _require(config, ["circuit", "mps"])
    with open(config["circuit"]) as fh:
        circuit = circuit_from_dict(json.load(fh))
    if not circuit.gates:
        raise ValidationError("circuit has an empty gate list")
    with open(config["mps"]) as fh:
        m = mps.mps_from_dict(json.load(fh))
    report = verify_circuit(circuit, m)
    serialize.dump_file(report, out_dir / "verification.json")
    return report


@_experiment("success_rate_scan")
def _run_success_rate_scan(config, out_dir, rng, threads):
    _require(config, ["n_list", "d_list"])
    delta = config.get("delta", 1.0)
    simulate = config.get("simulate", False)
    rows = []
    for n in config["n_list"]:
        for d in config["d_list"]:
            fit, fid = models.pbc_ground_mps(
                n, delta, d, rng, fidelity_floor=config.get("fidelity_floor", 0.99)
            )
            rc = mps.right_canonicalize(fit)
            p_formula = compiler.success_rate(rc.lam, mps.mps_norm(rc), 0.5)
            row = [n, d, fid, p_formula]
            if simulate:
                circuit = compiler.compile_pbc(rc, rng=rng)
                _, prob = _simulate_and_select(circuit)
                row.append(prob)
            rows.append(row)
    header = ["n", "d", "fit_fidelity", "p_success"]
    if simulate:
        header.append("p_measured")
    serialize.write_csv(out_dir / "success_rates.csv", header, rows)
    return {"points": len(rows)}


def _decompose_point(args):
    (n, d, layers, delta, fit_seed, gate_seed, cfg_dict) = args
    cfg_dict = dict(cfg_dict)
    floor = cfg_dict.pop("fidelity_floor", 0.99)
    cfg = OptimizerConfig(**cfg_dict)
    fit, _fid = models.pbc_ground_mps(
        n, delta, d, np.random.default_rng(fit_seed), fidelity_floor=floor
    )
    circuit = compiler.compile_pbc(
        fit, layers=layers, cfg=cfg, rng=np.random.default_rng(gate_seed)
    )
    phys, prob = _simulate_and_select(circuit)
    target = mps.to_statevector(fit)
    infidelity = 1.0 - simulator.fidelity(phys, target)
    worst_gate = max(circuit.meta["gate_distances"])
    return [n, d, layers, infidelity, worst_gate, prob]


@_experiment("decompose_scan")
def _run_decompose_scan(config, out_dir, rng, threads):
    _require(config, ["n_list", "d", "l_list"])
    cfg = _optimizer_config(config)
    cfg_dict = cfg.__dict__.copy()
    cfg_dict["fidelity_floor"] = config.get("fidelity_floor", 0.99)
    base_seed = int(rng.integers(0, 2**31 - 1))
    points = [
        # one fit seed per chain length so every layer count sees the same state
        (n, config["d"], layers, config.get("delta", 1.0), base_seed + 101 * n,
         base_seed + 31 * i + 1, cfg_dict)
        for i, (n, layers) in enumerate(
            (n, layers) for n in config["n_list"] for layers in config["l_list"]
        )
    ]
    rows = _pool_map(_decompose_point, points, threads)
    serialize.write_csv(
        out_dir / "decompose_scan.csv",
        ["n", "d", "layers", "infidelity", "worst_gate_distance", "p_success"],
        rows,
    )
    return {"points": len(rows), "max_infidelity": max(r[3] for r in rows)}


@_experiment("disentangle_scan")
def _run_disentangle_scan(config, out_dir, rng, threads):
    _require(config, ["model", "d_from", "d_to", "l_list"])
    cfg = _optimizer_config(config)
    model = config["model"]
    pairs = []  # (label, original, compressed)
    if model == "heisenberg_pbc":
        _require(config, ["n"])
        n = config["n"]
        fit, _f = models.pbc_ground_mps(n, config.get("delta", 1.0), config["d_from"], rng)
        comp, _rep = mps.compress_pbc(fit, config["d_to"], max_sweeps=config.get("sweeps", 100))
        pairs.append((0, fit, comp))
    elif model == "schwinger_obc":
        _require(config, ["n", "x", "mu", "k_states"])
        refs = schwinger_reference_states(
            config["n"],
            config["x"],
            config["mu"],
            config.get("l", 0.0),
            config["k_states"],
            config.get("d_ref", 40),
            rng,
        )
        for kk, state in enumerate(refs.states):
            orig, _ = mps.compress_obc(state, config["d_from"])
            comp, _ = mps.compress_obc(orig, config["d_to"])
            pairs.append((kk, orig, comp))
    else:
        raise ValidationError(f"unknown disentangle model {model!r}")
    rows = []
    for label, orig, comp in pairs:
        warm = None
        for layers in config["l_list"]:
            seed = int(rng.integers(0, 2**31 - 1))
            res = optimize_disentanglers(orig, comp, layers, cfg, seed=seed, warm_params=warm)
            warm = res.params
            rows.append([label, layers, res.fidelity, 1.0 - res.fidelity])
    serialize.write_csv(
        out_dir / "disentangle_scan.csv", ["state", "layers", "fidelity", "infidelity"], rows
    )
    return {"points": len(rows)}


@_experiment("quench")
def _run_quench(config, out_dir, rng, threads):
    _require(config, ["n_list", "delta_list", "dt", "t_final"])
    stride = config.get("record_stride", 4)
    summary = []
    for n in config["n_list"]:
        ham = models.heisenberg(n, 1.0, "pbc")
        _, vecs = models.exact_eigs(ham, 1, sector=0 if n % 2 == 0 else None)
        ground = vecs[0] / np.linalg.norm(vecs[0])
        for delta in config["delta_list"]:
            trace = simulator.evolve_quench(
                ground.astype(complex), delta, config["dt"], config["t_final"], stride
            )
            name = f"quench_n{n}_delta{delta:+.1f}.csv"
            serialize.write_csv(
                out_dir / name,
                ["t", "entropy", "energy"],
                list(zip(trace.times, trace.entropy, trace.energy)),
            )
            summary.append([n, delta, max(trace.entropy)])
    serialize.write_csv(out_dir / "entropy_summary.csv", ["n", "delta", "s_max"], summary)
    fits = {}
    for delta in config["delta_list"]:
        pts = [(row[0], row[2]) for row in summary if row[1] == delta]
        if len(pts) >= 3:
            ns, smax = np.array(pts).T
            slope, intercept = np.polyfit(ns, smax, 1)
            pred = slope * ns + intercept
            ss_res = float(np.sum((smax - pred) ** 2))
            ss_tot = float(np.sum((smax - np.mean(smax)) ** 2))
            fits[f"{delta:+.1f}"] = {
                "slope": float(slope),
                "r_squared": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
            }
    return {"points": len(summary), "volume_law_fits": fits}


def schwinger_reference_states(n, x, mu, l, k, d_ref, rng):
    """DMRG reference spectrum in the chargeless sector."""
    from .dmrg import dmrg_excited_obc

    terms = models.schwinger(n, x, mu, l)
    penalized = models.merge_terms(terms, models.charge_penalty(n, 10.0))
    mpo = models.terms_to_mpo(penalized)
    measure = models.terms_to_mpo(terms)
    return dmrg_excited_obc(
        mpo,
        k,
        d_max=d_ref,
        ortho_weight=100.0 * terms.coefficient_scale(),
        rng=rng,
        measure_mpo=measure,
    )


def _schwinger_point(args):
    (state_dict, terms_dict, d, layers, seed, cfg_dict, e_ref, kk) = args
    rng = np.random.default_rng(seed)
    cfg = OptimizerConfig(**cfg_dict)
    reference = mps.mps_from_dict(state_dict)
    terms = models.PauliTermSet(
        terms_dict["n"], [(c, tuple(ops)) for c, ops in terms_dict["terms"]]
    )
    compressed, comp_fid = mps.compress_obc(reference, d)
    circuit = compiler.compile_obc(compressed, layers=layers, cfg=cfg, rng=rng)
    circ_mps = compiler.staircase_circuit_to_mps(circuit)
    fid_ref = mps.fidelity_mps(circ_mps, reference)
    fid_src = mps.fidelity_mps(circ_mps, compressed)
    energy = simulator.mps_expectation(circ_mps, terms)
    return [kk, d, comp_fid, fid_ref, 1.0 - fid_src, abs(energy - e_ref) / terms.n_sites]


@_experiment("schwinger_spectrum")
def _run_schwinger_spectrum(config, out_dir, rng, threads):
    _require(config, ["n", "x", "mu", "k_states", "d_list"])
    n = config["n"]
    terms = models.schwinger(n, config["x"], config["mu"], config.get("l", 0.0))
    refs = schwinger_reference_states(
        n,
        config["x"],
        config["mu"],
        config.get("l", 0.0),
        config["k_states"],
        config.get("d_ref", 40),
        rng,
    )
    cfg = _optimizer_config(config)
    layers_by_d = {int(k): v for k, v in config.get("layers_by_d", {"4": 4, "8": 8}).items()}
    terms_dict = {"n": n, "terms": [(c, list(ops)) for c, ops in terms.terms]}
    points = []
    for kk, state in enumerate(refs.states):
        for d in config["d_list"]:
            seed = int(rng.integers(0, 2**31 - 1))
            points.append(
                (
                    mps.mps_to_dict(state),
                    terms_dict,
                    d,
                    layers_by_d.get(d, 8),
                    seed,
                    cfg.__dict__.copy(),
                    float(refs.energies[kk]),
                    kk,
                )
            )
    rows = _pool_map(_schwinger_point, points, threads)
    rows.sort(key=lambda r: (r[0], r[1]))
    serialize.write_csv(
        out_dir / "schwinger_spectrum.csv",
        ["k", "d", "compression_fidelity", "fidelity", "decomposition_infidelity",
         "e_diff_per_site"],
        rows,
    )
    serialize.write_csv(
        out_dir / "reference_energies.csv",
        ["k", "energy", "convergence"],
        [[kk, e, c] for kk, (e, c) in enumerate(zip(refs.energies, refs.converged))],
    )
    return {"points": len(rows), "energies": refs.energies.tolist()}


# ---------------------------------------------------------------------------
# entry point


def run(config: dict, out_dir, seed: int | None = None, threads: int = 1) -> dict:
    """Execute one experiment config; returns the manifest dictionary."""
    if "experiment" not in config:
        raise ValidationError("config needs an 'experiment' field")
    kind = config["experiment"]
    if kind not in _EXPERIMENTS:
        raise ValidationError(f"unknown experiment {kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if seed is None:
        seed = int(config.get("seed", 0))
    rng = np.random.default_rng(seed)
    start = time.time()
    metrics = _EXPERIMENTS[kind](config, out_dir, rng, threads)
    manifest = {
        "experiment": kind,
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - start, 3),
        "metrics": metrics,
    }
    serialize.dump_file(manifest, out_dir / "manifest.json")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mpsqc", description="MPS-to-circuit compilation experiments"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in sorted(_EXPERIMENTS):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ValidationError("config must be a JSON object")
        config["experiment"] = config.get("experiment", args.subcommand)
        if config["experiment"] != args.subcommand:
            raise ValidationError(
                f"config experiment {config['experiment']!r} != subcommand {args.subcommand!r}"
            )
        manifest = run(config, args.out_dir, args.seed, args.threads)
    except (ValidationError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(serialize.dumps(manifest["metrics"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
