"""Command-line interface: ``postvar <subcommand> [flags]``.

Settings come from built-in defaults, then an optional ``--config`` file of
flat ``key = value`` lines (``#`` starts a comment, keys may use ``-`` or
``_``), then explicit flags.  Every artifact embeds the resolved config and
the package version.  Failures print one ``error: {json}`` line to stderr
and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import lemma_trial, theorem1_trial, theorem2_trial, wedin_trial
from .data import (
    DATA_DIR_ENV,
    SYNTH_KINDS,
    Dataset,
    fashion_mnist_available,
    load_fashion_binary,
    synth_dataset,
    train_test_split_tags,
)
from .exceptions import ConfigError, PostVarError
from .features import FeatureMatrix, PostVariationalFeatures, build_registries, prune_by_fidelity, prune_by_gradient
from .head import (
    RegressionModel,
    compute_loss,
    fit_constrained,
    fit_least_squares,
    fit_logistic,
    fit_softmax,
    predict,
    training_loss,
)
from .pauli import shadow_norm_bound
from .shadows import MODES as SAMPLED_MODES
from .shadows import STRATEGIES, plan_budget
from .sim import MAX_QUBITS

FEATURE_MODES = ("exact",) + SAMPLED_MODES
TASKS = ("regression", "binary", "multiclass")
CONSTRAINTS = ("none", "ridge", "ball")
PRUNERS = ("none", "gradient", "fidelity")

# post-variational rows of the coat-vs-shirt experiment: (name, strategy, order, locality)
FMNIST_ROWS = (
    ("ansatz 1-order", "ansatz-expansion", 1, 1),
    ("ansatz 2-order", "ansatz-expansion", 2, 1),
    ("observable 1-local", "observable-construction", 0, 1),
    ("observable 2-local", "observable-construction", 0, 2),
    ("observable 3-local", "observable-construction", 0, 3),
    ("hybrid 1-order + 1-local", "hybrid", 1, 1),
    ("hybrid 2-order + 1-local", "hybrid", 2, 1),
    ("hybrid 1-order + 2-local", "hybrid", 1, 2),
)


@dataclass
class RunConfig:
    """Every setting a run depends on; serialized into each artifact."""

    n: int = 4
    locality: int = 1
    order: int = 1
    strategy: str = "hybrid"
    mode: str = "exact"
    epsilon: float = 0.1
    delta: float = 0.05
    seed: int = 0
    layers: int = 2
    entangler: str = "reversed"
    prune: str = "none"
    tau_g: float = 1e-3
    tau_f: float = 1e-3
    dataset: str = "synth:linear"
    d: int = 100
    test_fraction: float = 0.0
    out: str = "."
    workers: int = 1
    task: str = "regression"
    constraint: str = "none"
    lam: float = 0.0
    fit_intercept: bool = False
    trials: int = 100

    def problems(self) -> list[str]:
        """All violated constraints (empty when valid)."""
        bad = []

        def check(cond, msg):
            if not cond:
                bad.append(msg)

        check(1 <= self.n <= MAX_QUBITS, f"n must lie in [1, {MAX_QUBITS}], got {self.n}")
        check(1 <= self.locality <= max(self.n, 1), f"locality must lie in [1, n={self.n}], got {self.locality}")
        check(self.layers >= 1, f"layers must be >= 1, got {self.layers}")
        k = self.n * self.layers
        check(0 <= self.order <= k, f"order must lie in [0, k={k}], got {self.order}")
        if self.entangler == "reversed" and self.n >= 2:
            check(self.layers % 2 == 0, f"entangler=reversed needs an even layer count, got {self.layers}")
        check(self.entangler in ("reversed", "forward", "none"), f"unknown entangler {self.entangler!r}")
        check(self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        check(self.mode in FEATURE_MODES, f"mode must be one of {FEATURE_MODES}, got {self.mode!r}")
        check(0 < self.epsilon < 2, f"epsilon must lie in (0, 2), got {self.epsilon}")
        check(0 < self.delta < 1, f"delta must lie in (0, 1), got {self.delta}")
        check(self.prune in PRUNERS, f"prune must be one of {PRUNERS}, got {self.prune!r}")
        check(self.tau_g >= 0, f"tau_g must be >= 0, got {self.tau_g}")
        check(0 <= self.tau_f <= 4, f"tau_f must lie in [0, 4], got {self.tau_f}")
        check(self.d >= 1, f"d must be >= 1, got {self.d}")
        check(0 <= self.test_fraction < 1, f"test_fraction must lie in [0, 1), got {self.test_fraction}")
        check(self.workers >= 1, f"workers must be >= 1, got {self.workers}")
        check(self.task in TASKS, f"task must be one of {TASKS}, got {self.task!r}")
        check(self.constraint in CONSTRAINTS, f"constraint must be one of {CONSTRAINTS}, got {self.constraint!r}")
        check(self.lam >= 0, f"lam must be >= 0, got {self.lam}")
        check(self.trials >= 1, f"trials must be >= 1, got {self.trials}")
        check(self.seed >= 0, f"seed must be >= 0, got {self.seed}")
        return bad

    def validate(self) -> "RunConfig":
        bad = self.problems()
        if bad:
            raise ConfigError(bad)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        low = str(value).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; unknown keys and bad values are collected, not skipped."""
    out, bad = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            bad.append(f"config line {lineno}: expected key = value")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            bad.append(f"config line {lineno}: unknown key {key!r}")
            continue
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            bad.append(f"config line {lineno}: {exc}")
    if bad:
        raise ConfigError(bad)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values).validate()


# --- artifact helpers ---------------------------------------------------------


def _provenance(cfg: RunConfig, command: str) -> dict:
    return {"tool": "postvar", "version": __version__, "command": command, "config": cfg.to_dict()}


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_rows(path: Path, rows: list[dict], provenance: dict) -> Path:
    buf = io.StringIO()
    buf.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _emit(result: dict) -> None:
    print(json.dumps(result, sort_keys=True))


# --- data ------------------------------------------------------------------------


def load_dataset(cfg: RunConfig) -> Dataset:
    """``synth:<kind>``, ``fmnist`` (files under ``$POSTVAR_DATA_DIR``) or a dataset CSV path."""
    spec = cfg.dataset
    if spec.startswith("synth:"):
        kind = spec.split(":", 1)[1]
        if kind not in SYNTH_KINDS:
            raise ConfigError([f"unknown synthetic kind {kind!r}; expected one of {SYNTH_KINDS}"])
        rng = np.random.default_rng(cfg.seed)
        if kind == "linear":
            ds = planted_linear(cfg, rng)
        else:
            ds = synth_dataset(kind, {"d": cfg.d}, rng)
        if cfg.test_fraction > 0:
            ds.split = train_test_split_tags(len(ds), cfg.test_fraction, rng)
        return ds
    if spec == "fmnist" or spec.startswith("fmnist:"):
        root = spec.split(":", 1)[1] if ":" in spec else None
        return load_fashion_binary(root, seed=cfg.seed)
    return Dataset.from_csv(spec)


def planted_linear(cfg: RunConfig, rng) -> Dataset:
    """Targets linear in the exact post-variational features of the configured registries.

    Weights are planted in the feature space the pipeline will build, so an
    exact-mode least-squares head recovers them.
    """
    n_features = 4 * cfg.n
    transformer = _transformer(cfg).fit(np.zeros((1, n_features)))
    ds = synth_dataset("linear", {"d": cfg.d, "n_features": n_features,
                                  "feature_map": transformer.transform}, rng)
    ds.meta["feature_map"] = "exact post-variational features"
    return ds


def _transformer(cfg: RunConfig, **overrides) -> PostVariationalFeatures:
    params = dict(
        n_qubits=cfg.n, strategy=cfg.strategy, locality=cfg.locality, order=cfg.order,
        layers=cfg.layers, entangler=cfg.entangler, mode=cfg.mode, epsilon=cfg.epsilon,
        delta=cfg.delta, prune=None if cfg.prune == "none" else cfg.prune, tau_g=cfg.tau_g,
        tau_f=cfg.tau_f, random_state=cfg.seed, n_jobs=cfg.workers,
    )
    params.update(overrides)
    return PostVariationalFeatures(**params)


def _labels_for(task: str, labels):
    if task == "regression":
        return np.asarray(labels, dtype=float)
    return np.asarray(labels).astype(int)


# --- subcommands ---------------------------------------------------------------


def make_features(cfg: RunConfig, ds: Dataset, command: str = "features") -> dict[str, Path]:
    """Fit registries (and pruning) on the train rows, write one feature CSV per split."""
    train = ds.part("train")
    transformer = _transformer(cfg).fit(train.features)
    out = _out_dir(cfg)
    paths = {}
    for tag in ("train", "test"):
        part = ds.part(tag)
        if len(part) == 0:
            continue
        fm = transformer.generate(part.features, labels=part.labels, row_ids=part.ids)
        meta = _provenance(cfg, command)
        meta["split"] = tag
        meta["dataset_meta"] = ds.meta
        path = out / f"features_{tag}.csv"
        fm.to_csv(path, meta=meta)
        paths[tag] = path
    return paths


def fit_head(cfg: RunConfig, fm: FeatureMatrix) -> RegressionModel:
    y = _labels_for(cfg.task, fm.labels)
    if cfg.task == "regression":
        if cfg.constraint == "none":
            return fit_least_squares(fm.Q, y, cfg.fit_intercept)
        return fit_constrained(fm.Q, y, cfg.constraint, cfg.lam, fit_intercept=cfg.fit_intercept)
    kw = dict(constraint=cfg.constraint, lam=cfg.lam, fit_intercept=cfg.fit_intercept)
    if cfg.task == "binary":
        return fit_logistic(fm.Q, y, **kw)
    return fit_softmax(fm.Q, y, **kw)


def metrics(model: RegressionModel, fm: FeatureMatrix) -> dict:
    y = _labels_for(model.task, fm.labels)
    pred = predict(model, fm.Q)
    if model.task == "regression":
        return {"rmse": compute_loss("rmse", y, pred), "mae": compute_loss("mae", y, pred)}
    if model.task == "binary":
        return {"bce": compute_loss("bce", y, pred), "accuracy": float(np.mean((pred > 0.5) == y))}
    return {"cross_entropy": training_loss(model, fm.Q, y),
            "accuracy": float(np.mean(np.argmax(pred, axis=1) == y))}


def cmd_features(cfg, args):
    paths = make_features(cfg, load_dataset(cfg))
    return {k: str(v) for k, v in paths.items()}


def cmd_train(cfg, args):
    src = Path(args.features or Path(cfg.out) / "features_train.csv")
    fm = FeatureMatrix.from_csv(src)
    model = fit_head(cfg, fm)
    model.col_specs = fm.column_labels
    report = metrics(model, fm)
    model.metadata.update({"provenance": _provenance(cfg, "train"), "train_metrics": report,
                           "features": str(src)})
    out = _out_dir(cfg)
    model.to_json(out / "model.json")
    _write_json(out / "train_report.json", {**_provenance(cfg, "train"), "metrics": report})
    return {"model": str(out / "model.json"), "metrics": report}


def cmd_eval(cfg, args):
    model = RegressionModel.from_json(Path(args.model or Path(cfg.out) / "model.json"))
    src = Path(args.features or Path(cfg.out) / "features_train.csv")
    fm = FeatureMatrix.from_csv(src)
    if model.col_specs and model.col_specs != fm.column_labels:
        raise ConfigError(["feature columns do not match the model's column specs"])
    report = metrics(model, fm)
    path = _write_rows(Path(_out_dir(cfg)) / f"metrics_{src.stem}.csv",
                       [{"metric": k, "value": v} for k, v in report.items()], _provenance(cfg, "eval"))
    return {"metrics": report, "path": str(path)}


def budget_plans(cfg: RunConfig, strategies=None) -> list[dict]:
    k = cfg.n * cfg.layers
    out = []
    for strategy in strategies or STRATEGIES:
        _, shifts, paulis = build_registries(strategy, cfg.n, cfg.locality, cfg.order, cfg.layers,
                                             cfg.entangler)
        p = len(shifts) if strategy != "observable-construction" else 1
        snorm = max(shadow_norm_bound(x) for x in paulis)
        plans = {mode: plan_budget(strategy, mode, p, len(paulis), cfg.n, cfg.d, cfg.epsilon,
                                   cfg.delta, snorm).to_dict() for mode in SAMPLED_MODES}
        out.append({"strategy": strategy, "k": k, "plans": plans,
                    "favored_mode": plans["direct"]["favored_mode"]})
    return out


def cmd_budget(cfg, args):
    strategies = [cfg.strategy] if args.strategy is not None else list(STRATEGIES)
    plans = budget_plans(cfg, strategies)
    path = _write_json(_out_dir(cfg) / "budget.json", {**_provenance(cfg, "budget"), "budgets": plans})
    for entry in plans:
        chosen = cfg.mode if cfg.mode in SAMPLED_MODES else entry["favored_mode"]
        print(f"verdict strategy={entry['strategy']} requested={chosen} recommended={entry['favored_mode']} "
              f"direct_shots={entry['plans']['direct']['total_shots']} "
              f"shadow_shots={entry['plans']['shadows']['total_shots']}")
    return {"path": str(path)}


def cmd_prune(cfg, args):
    ds = load_dataset(cfg).part("train")
    spec, shifts, paulis = build_registries(cfg.strategy, cfg.n, cfg.locality, cfg.order, cfg.layers,
                                            cfg.entangler)
    rows = []
    for u in range(spec.k):
        g = max((prune_by_gradient(ds.features, spec, u, None, p, cfg.tau_g) for p in paulis),
                key=lambda dec: dec.score)
        f = prune_by_fidelity(ds.features, spec, u, None, cfg.tau_f)
        rows.append({"parameter": u, "gradient_score": g.score, "fidelity_score": f.score,
                     "tau_g": cfg.tau_g, "tau_f": cfg.tau_f,
                     "drop_gradient": int(g.drop), "drop_fidelity": int(f.drop)})
    out = _out_dir(cfg)
    _write_rows(out / "prune_scores.csv", rows, _provenance(cfg, "prune"))
    method = cfg.prune if cfg.prune != "none" else "gradient"
    transformer = _transformer(cfg, mode="exact", prune=method).fit(ds.features)
    kept = [str(c) for c in transformer.get_feature_names_out()]
    text = "# " + json.dumps(_provenance(cfg, "prune"), sort_keys=True) + "\n" + "\n".join(kept) + "\n"
    (out / "retained_specs.txt").write_text(text, encoding="utf-8")
    return {"retained": len(kept), "total": len(shifts) * len(paulis),
            "scores": str(out / "prune_scores.csv")}


def cmd_verify_bounds(cfg, args):
    rng = np.random.default_rng(cfg.seed)
    rows, violations = [], 0
    for t in range(cfg.trials):
        for rep in (theorem1_trial(rng, epsilon=cfg.epsilon), theorem2_trial(rng, "ball", epsilon=cfg.epsilon),
                    theorem2_trial(rng, "logistic_ball", epsilon=cfg.epsilon)):
            violations += not rep.satisfied
            rows.append({"theorem": rep.theorem, "m": rep.m, "d": rep.d, "epsilon": rep.epsilon,
                         "threshold": rep.max_norm_threshold, "observed_max_norm": rep.observed_max_norm,
                         "delta_loss": rep.delta_loss, "satisfied": int(rep.satisfied)})
    lemma_bad = sum(1 for p, a, b in (lemma_trial(rng) for _ in range(2 * cfg.trials)) if p and a != b)
    wedin_bad = sum(1 for lhs, rhs in (wedin_trial(rng) for _ in range(2 * cfg.trials)) if lhs > rhs + 1e-10)
    path = _write_rows(_out_dir(cfg) / "bounds_trials.csv", rows, _provenance(cfg, "verify-bounds"))
    summary = {"path": str(path), "loss_violations": violations, "lemma_violations": lemma_bad,
               "wedin_violations": wedin_bad}
    if violations or lemma_bad or wedin_bad:
        raise PostVarError(f"bound verification failed: {summary}")
    return summary


def _binary_fit_eval(Q_train, y_train, Q_test, y_test, lam):
    model = fit_logistic(Q_train, y_train, "ridge", lam, fit_intercept=True)
    out = {}
    for tag, Q, y in (("train", Q_train, y_train), ("test", Q_test, y_test)):
        p = predict(model, Q)
        out[f"{tag}_loss"] = compute_loss("bce", y, p)
        out[f"{tag}_accuracy"] = float(np.mean((p > 0.5) == y))
    return out


def run_fmnist_rows(cfg: RunConfig, ds: Dataset, rows=FMNIST_ROWS) -> list[dict]:
    """Train and evaluate each post-variational configuration with a logistic head."""
    train, test = ds.part("train"), ds.part("test")
    lam = cfg.lam if cfg.lam > 0 else 1.0 / (2 * len(train))
    results = []
    baseline = _binary_fit_eval(train.features, train.labels, test.features, test.labels, lam)
    results.append({"config": "classical logistic", "strategy": "none", "order": 0, "locality": 0,
                    "features": train.n_features, **baseline})
    for name, strategy, order, locality in rows:
        t = _transformer(cfg, strategy=strategy, order=order, locality=locality, prune=None)
        t.fit(train.features)
        Qtr, Qte = t.transform(train.features), t.transform(test.features)
        res = _binary_fit_eval(Qtr, train.labels, Qte, test.labels, lam)
        results.append({"config": name, "strategy": strategy, "order": order, "locality": locality,
                        "features": Qtr.shape[1], **res})
    return results


def cmd_repro_fmnist(cfg, args):
    root = cfg.dataset.split(":", 1)[1] if cfg.dataset.startswith("fmnist:") else None
    if not fashion_mnist_available(root):
        raise FileNotFoundError(
            f"Fashion-MNIST IDX files not found; set {DATA_DIR_ENV} or pass --dataset fmnist:<dir>"
        )
    ds = load_fashion_binary(root, seed=cfg.seed)
    rows = FMNIST_ROWS if args.strategy is None else [r for r in FMNIST_ROWS if r[1] == cfg.strategy]
    results = run_fmnist_rows(cfg, ds, rows)
    path = _write_rows(_out_dir(cfg) / "fmnist_results.csv", results, _provenance(cfg, "repro-fmnist"))
    return {"path": str(path), "rows": len(results)}


def cmd_repro_synth(cfg, args):
    if not cfg.dataset.startswith("synth:"):
        cfg.dataset = "synth:linear"
    kind = cfg.dataset.split(":", 1)[1]
    if kind != "linear" and cfg.task == "regression":
        cfg.task = "binary"
    ds = load_dataset(cfg)
    paths = make_features(cfg, ds, "repro-synth")
    fm = FeatureMatrix.from_csv(paths["train"])
    model = fit_head(cfg, fm)
    model.col_specs = fm.column_labels
    model.metadata["provenance"] = _provenance(cfg, "repro-synth")
    out = _out_dir(cfg)
    model.to_json(out / "model.json")
    rows = [{"split": tag, "metric": k, "value": v}
            for tag, p in paths.items() for k, v in metrics(model, FeatureMatrix.from_csv(p)).items()]
    _write_rows(out / "synth_metrics.csv", rows, _provenance(cfg, "repro-synth"))
    return {"features": {k: str(v) for k, v in paths.items()}, "metrics": rows}


COMMANDS = {
    "features": (cmd_features, "dataset -> feature matrix CSV per split"),
    "train": (cmd_train, "feature CSV -> model JSON and loss report"),
    "eval": (cmd_eval, "model JSON + feature CSV -> metrics CSV"),
    "budget": (cmd_budget, "measurement budgets and the favored mode per strategy"),
    "prune": (cmd_prune, "gradient/fidelity scores and retained column specs"),
    "verify-bounds": (cmd_verify_bounds, "randomized checks of the error-propagation bounds"),
    "repro-fmnist": (cmd_repro_fmnist, "coat-vs-shirt experiment over all strategies"),
    "repro-synth": (cmd_repro_synth, "end-to-end run on a synthetic dataset"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat key = value file; flags override it")
    a("--n", type=int, help="qubit count")
    a("--locality", type=int, help="maximum Pauli weight L")
    a("--order", type=int, help="derivative order R of the shift ensemble")
    a("--strategy", choices=STRATEGIES)
    a("--mode", choices=FEATURE_MODES, help="exact simulation or sampled estimation")
    a("--epsilon", type=float, help="target additive error per neuron")
    a("--delta", type=float, help="failure probability")
    a("--seed", type=int)
    a("--layers", type=int, help="Ansatz layers")
    a("--entangler", choices=("reversed", "forward", "none"))
    a("--prune", choices=PRUNERS)
    a("--tau-g", dest="tau_g", type=float, help="gradient pruning threshold")
    a("--tau-f", dest="tau_f", type=float, help="fidelity pruning threshold")
    a("--dataset", help="synth:<blobs|parity|linear>, fmnist[:dir] or a dataset CSV")
    a("--d", type=int, help="synthetic dataset size")
    a("--test-fraction", dest="test_fraction", type=float)
    a("--out", help="output directory")
    a("--workers", type=int, help="worker threads for sampled feature generation")
    a("--task", choices=TASKS)
    a("--constraint", choices=CONSTRAINTS)
    a("--lam", type=float, help="ridge strength")
    a("--fit-intercept", dest="fit_intercept", action="store_const", const=True)
    a("--trials", type=int, help="trial count for verify-bounds")
    a("--features", help="feature CSV for train/eval")
    a("--model", help="model JSON for eval")

    parser = argparse.ArgumentParser(prog="postvar", description="Post-variational quantum neural networks.")
    parser.add_argument("--version", action="version", version=f"postvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _error_line(kind: str, message, problems=None) -> None:
    payload = {"error": kind, "message": str(message)}
    if problems:
        payload["problems"] = list(problems)
    print("error: " + json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        func, _ = COMMANDS[args.command]
        result = func(cfg, args)
    except ConfigError as exc:
        _error_line("config", exc, exc.problems)
        return 2
    except (PostVarError, ValueError, FileNotFoundError, RuntimeError) as exc:
        _error_line(type(exc).__name__, exc)
        return 1
    _emit({"command": args.command, "result": result})
    return 0


if __name__ == "__main__":
    sys.exit(main())
