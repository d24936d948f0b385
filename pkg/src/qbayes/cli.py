"""Command-line driver: ``qbayes <command> [options]``.

Every command prints a JSON result on stdout and, with ``--out DIR``, also
writes it to ``DIR/<command>.json`` (plus command-specific files). A JSON file
given with ``--config`` supplies defaults for the command's options; explicit
command-line flags override it.

Exit codes: 0 success, 2 configuration or argument error, 3 data-format
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FormatError, InvalidArgument, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_FORMAT, EXIT_NUMERICAL = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"no such file: {p}")
    return p.read_text()


def _csv(path, binary: bool = False):
    from .encode import load_csv

    if not Path(path).is_file():
        raise ConfigError(f"no such file: {path}")
    return load_csv(path, binary_labels=binary)


def _features(path):
    """Feature rows of a CSV file whose last column is a target (ignored)."""
    return _csv(path)[0]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args, out):
    from .core import measure_shots, parse_circuit, run_circuit, zero_state, init_basis_state

    circuit = parse_circuit(_read_text(args.circuit), args.qubits)
    theta = np.zeros(circuit.num_params) if args.theta is None else np.array(args.theta)
    start = zero_state(circuit.num_qubits) if args.bits is None else init_basis_state(circuit.num_qubits, args.bits)
    final = run_circuit(circuit, theta, start)
    result = {
        "num_qubits": circuit.num_qubits,
        "probabilities": final.probabilities().tolist(),
        "amplitudes_real": final.amplitudes.real.tolist(),
        "amplitudes_imag": final.amplitudes.imag.tolist(),
    }
    if args.shots:
        result["counts"] = measure_shots(final, args.shots, args.seed).tolist()
    return result


def cmd_qft(args, out):
    from .core import init_basis_state
    from .evolve import qft, qft_gates

    n = args.qubits
    state = init_basis_state(n, [(args.input >> k) & 1 for k in range(n)])
    dense = qft(2**n, state)
    gates = qft_gates(state)
    return {
        "q": 2**n,
        "input": args.input,
        "amplitudes_real": dense.amplitudes.real.tolist(),
        "amplitudes_imag": dense.amplitudes.imag.tolist(),
        "gate_vs_dense_max_error": float(np.max(np.abs(dense.amplitudes - gates.amplitudes))),
    }


def cmd_trotter(args, out):
    from .core import random_state
    from .evolve import evolve_exact, evolve_trotter, parse_hamiltonian

    h = parse_hamiltonian(_read_text(args.hamiltonian))
    state = random_state(h.num_qubits, np.random.default_rng(args.seed))
    exact = evolve_exact(h, args.time, state).amplitudes
    errors = []
    for steps in args.steps:
        approx = evolve_trotter(h, args.time, steps, state).amplitudes
        errors.append({"steps": steps, "error": float(np.linalg.norm(approx - exact))})
    return {"num_qubits": h.num_qubits, "time": args.time, "commuting": h.is_commuting(), "errors": errors}


def cmd_grover(args, out):
    from .algos import OracleSpec, default_iterations, grover_search, success_probability

    oracle = OracleSpec(args.size, args.marked)
    res = grover_search(oracle, args.iterations, args.seed)
    k = res.iterations
    return {
        "size": args.size,
        "marked": args.marked,
        "iterations": k,
        "measured": res.index,
        "probability": res.probability,
        "closed_form": success_probability(args.size, k),
        "default_iterations": default_iterations(args.size),
    }


def cmd_minmap(args, out):
    from .algos import MapObjective, minimize_map

    if args.table is not None:
        values = _floats(_read_text(args.table))
    elif args.values is not None:
        values = args.values
    else:
        raise ConfigError("minmap needs --table FILE or --values")
    obj = MapObjective(np.array(values))
    budget = args.budget or 30 * max(1, int(np.ceil(np.log2(max(2, obj.candidate_count)))))
    res = minimize_map(obj, args.seed, budget)
    return {
        "index": res.index,
        "value": res.value,
        "prob": res.probability,
        "initial_value": res.initial_value,
        "rounds": res.rounds,
    }


def cmd_kernel(args, out):
    from .encode import EncodingSpec
    from .kernel import gram_matrix

    X = _features(args.data)
    spec = EncodingSpec(args.encoding, X.shape[1])
    K = gram_matrix(X, spec)
    if out is not None:
        np.savetxt(out / "gram.csv", K, delimiter=",", fmt="%.17g")
    return {
        "encoding": args.encoding,
        "size": K.shape[0],
        "min_eigenvalue": float(np.linalg.eigvalsh(K).min()),
        "gram": K.tolist(),
    }


def cmd_krr(args, out):
    from .encode import EncodingSpec
    from .kernel import krr_fit, krr_predict_many

    X, y = _csv(args.train)
    spec = EncodingSpec(args.encoding, X.shape[1])
    model = krr_fit(X, y, spec, args.gamma)
    if out is not None:
        model.save(out / "krr_model.json")
    result = {"encoding": args.encoding, "gamma": args.gamma, "coefficients": model.coefficients.tolist()}
    if args.test:
        Xt, yt = _csv(args.test)
        pred = krr_predict_many(model, Xt)
        result["predictions"] = pred.tolist()
        result["mse"] = float(np.mean((pred - yt) ** 2))
    return result


def cmd_gp(args, out):
    from .kernel import make_kernel
    from .regress import gp_fit, gp_predict

    X, y = _csv(args.train)
    kernel = make_kernel(args.kernel, X.shape[1], args.bandwidth)
    model = gp_fit(X, y, kernel, args.noise)
    Xt = _features(args.test) if args.test else X
    preds = [gp_predict(model, x) for x in Xt]
    return {
        "kernel": args.kernel,
        "noise": args.noise,
        "jitter": model.jitter,
        "mean": [m for m, _ in preds],
        "variance": [v for _, v in preds],
    }


def cmd_pinv(args, out):
    from .regress import pinv_fit, pinv_predict

    X, y = _csv(args.train)
    model = pinv_fit(X, y)
    result = {"rank": model.rank, "coefficients": model.coefficients.tolist()}
    if args.test:
        result["predictions"] = [pinv_predict(model, x) for x in _features(args.test)]
    return result


def cmd_qnn_train(args, out):
    from .qnn import TrainConfig, accuracy, layered_model, train_sgd, write_training_log

    X, y = _csv(args.data, binary=True)
    if not np.all(np.isin(X, (-1.0, 1.0))):
        raise FormatError(f"{args.data}: QNN inputs must be +1 or -1")
    data = [(row.astype(int), int(label)) for row, label in zip(X, y)]
    cfg = TrainConfig(args.lr, args.epochs, args.batch, args.grad_mode, args.shots, args.epsilon, args.seed)
    curve = []
    model, losses = train_sgd(layered_model(X.shape[1], args.sweeps), data, cfg, curve.append)
    if out is not None:
        model.save(out / "model.json")
        write_training_log(out / "curve.csv", curve)
    return {"losses": losses, "train_accuracy": accuracy(model, data), "theta": model.theta.tolist()}


_MNIST_KEYS = {
    "data_dir": "data_dir",
    "train_size": "train_size",
    "test_size": "test_size",
    "full_split": "full_split",
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch": "batch",
    "grad_mode": "grad_mode",
    "shots": "shots",
    "downscale": "downscale",
    "threshold": "threshold",
    "sweeps": "sweeps",
    "baseline": "baseline",
}


def cmd_mnist(args, out):
    from .pipeline import ExperimentConfig, run_experiment

    settings = {field: getattr(args, key) for key, field in _MNIST_KEYS.items() if getattr(args, key) is not None}
    settings["seed"] = args.seed
    settings["threads"] = args.threads
    cfg = ExperimentConfig.from_dict(settings)
    result = run_experiment(cfg, out)
    return result.report


COMMANDS = {
    "simulate": cmd_simulate,
    "qft": cmd_qft,
    "trotter": cmd_trotter,
    "grover": cmd_grover,
    "minmap": cmd_minmap,
    "kernel": cmd_kernel,
    "krr": cmd_krr,
    "gp": cmd_gp,
    "pinv": cmd_pinv,
    "qnn-train": cmd_qnn_train,
    "mnist": cmd_mnist,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _global_parser(default=None) -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False, argument_default=default)
    g.add_argument("--seed", type=int, help="RNG seed (default 0; 7 for mnist)")
    g.add_argument("--out", type=Path, help="directory for result files")
    g.add_argument("--config", type=Path, help="JSON file with option defaults")
    g.add_argument("--threads", type=int, help="threads for test-set evaluation (default 1)")
    return g


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    glob = _global_parser()
    parser = argparse.ArgumentParser(prog="qbayes", description=__doc__.splitlines()[0], parents=[glob])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help):
        # suppress defaults so global flags given before the command survive
        p = sub.add_parser(name, help=help, parents=[_global_parser(argparse.SUPPRESS)], argument_default=argparse.SUPPRESS)
        subs[name] = p
        return p

    p = add("simulate", "run a circuit file on |0...0> (or --bits)")
    p.add_argument("--circuit", required=True)
    p.add_argument("--qubits", type=int)
    p.add_argument("--theta", type=_floats)
    p.add_argument("--bits", type=_ints)
    p.add_argument("--shots", type=int)

    p = add("qft", "quantum Fourier transform of a basis state")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--input", type=int)

    p = add("trotter", "symmetric Trotter error against exact evolution")
    p.add_argument("--hamiltonian", required=True)
    p.add_argument("--time", type=float)
    p.add_argument("--steps", type=_ints)

    p = add("grover", "Grover search for one marked index")
    p.add_argument("--size", "--n", dest="size", type=int, required=True, help="domain size N")
    p.add_argument("--marked", type=int, required=True)
    p.add_argument("--iterations", "--iters", dest="iterations", type=int)

    p = add("minmap", "Grover threshold descent over a loss table")
    p.add_argument("--table")
    p.add_argument("--values", type=_floats)
    p.add_argument("--budget", type=int)

    p = add("kernel", "Gram matrix of a quantum encoding")
    p.add_argument("--data", required=True)
    p.add_argument("--encoding", choices=("amplitude", "angle", "basis"))

    p = add("krr", "kernel ridge regression with a quantum kernel")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--encoding", choices=("amplitude", "angle", "basis"))
    p.add_argument("--gamma", type=float)

    p = add("gp", "Gaussian-process regression")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--kernel", choices=("rbf", "amplitude", "angle", "basis"))
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--noise", type=float)

    p = add("pinv", "least squares through the pseudo-inverse")
    p.add_argument("--train", required=True)
    p.add_argument("--test")

    p = add("qnn-train", "train the readout-qubit classifier on a +-1 CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--sweeps", type=lambda s: tuple(s.split(",")))
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--grad-mode", dest="grad_mode", choices=("analytic", "hadamard_shots", "finite_diff"))
    p.add_argument("--shots", type=int)
    p.add_argument("--epsilon", type=float)

    p = add("mnist", "3-vs-6 MNIST experiment")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--train-size", dest="train_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--full-split", dest="full_split", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--grad-mode", dest="grad_mode", choices=("analytic", "hadamard_shots", "finite_diff"))
    p.add_argument("--shots", type=int)
    p.add_argument("--downscale", choices=("bilinear", "block"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--sweeps", type=lambda s: tuple(s.split(",")))
    p.add_argument("--no-baseline", dest="baseline", action="store_false")
    return parser, subs


DEFAULTS = {
    "simulate": {"qubits": None, "theta": None, "bits": None, "shots": 0},
    "qft": {"input": 0},
    "trotter": {"time": 1.0, "steps": [1, 2, 4, 8]},
    "grover": {"iterations": None},
    "minmap": {"table": None, "values": None, "budget": None},
    "kernel": {"encoding": "angle"},
    "krr": {"test": None, "encoding": "angle", "gamma": 1e-3},
    "gp": {"test": None, "kernel": "rbf", "bandwidth": 1.0, "noise": 1e-2},
    "pinv": {"test": None},
    "qnn-train": {
        "sweeps": ("XX", "ZX"),
        "lr": 0.05,
        "epochs": 10,
        "batch": 1,
        "grad_mode": "analytic",
        "shots": 1000,
        "epsilon": 1e-4,
    },
    "mnist": {key: None for key in _MNIST_KEYS},
}


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _resolve(args: argparse.Namespace, subparser: argparse.ArgumentParser) -> argparse.Namespace:
    """Merge built-in defaults, the config file and explicit flags (in that order)."""
    cfg = _load_config(getattr(args, "config", None))
    cmd = args.command
    allowed = set(DEFAULTS[cmd]) | {a.dest for a in subparser._actions} | {"seed", "threads"}
    allowed -= {"help", "config", "out", "command"}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for {cmd}: {sorted(unknown)}")
    merged = {"seed": 7 if cmd == "mnist" else 0, "threads": 1, "out": None, "config": None}
    merged.update(DEFAULTS[cmd])
    merged.update(cfg)
    merged.update({k: v for k, v in vars(args).items() if v is not None})
    if merged["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    for key in ("sweeps",):
        if isinstance(merged.get(key), list):
            merged[key] = tuple(merged[key])
    return argparse.Namespace(**merged)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args = _resolve(args, subs[args.command])
        out = None
        if args.out is not None:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
        result = _jsonable(COMMANDS[args.command](args, out))
        text = json.dumps(result, indent=2, sort_keys=True)
        if out is not None and args.command != "mnist":
            (out / f"{args.command}.json").write_text(text + "\n")
        print(text)
        return EXIT_OK
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigError, InvalidArgument, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
