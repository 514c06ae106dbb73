"""Experiment runner.

Subcommands: ``pretrain``, ``finetune``, ``run``, ``ablate``, ``sweep``,
``eval``. Every config key doubles as a ``--key value`` flag; the env var
``DUALSE_LOG`` (error/warn/info/debug) sets logging verbosity. Outputs are
plot-ready CSV files plus a binary checkpoint.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import datasets, metrics, model, spectral, trainer
from .config import FUSION_MODES, build_config, config_keys, read_config_file
from .errors import ConfigError, DualSEError
from .model import STRUCTURE_VARIANTS, Hyperparams
from .trainer import TrainConfig

log = logging.getLogger("dualse")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def setup_logging():
    level = os.environ.get("DUALSE_LOG", "warn").strip().lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def load_dataset(cfg):
    if cfg.dataset == "synthetic":
        ds = datasets.synthesize_subspaces(
            cfg.synth_k,
            cfg.synth_sub_dim,
            cfg.synth_ambient_dim,
            cfg.synth_per_cluster,
            cfg.synth_noise_sigma,
            cfg.seed,
        )
    elif cfg.dataset == "csv":
        ds = datasets.load_csv(cfg.csv_path, labels_column=cfg.labels_column)
    else:
        ds = datasets.load_idx(cfg.idx_images, cfg.idx_labels)
    if cfg.per_class:
        ds = datasets.subsample_per_class(ds, cfg.per_class)
    if cfg.normalize:
        ds = datasets.normalize_features(ds)
    return ds


def resolve_k(cfg, ds):
    if cfg.k:
        return cfg.k
    if ds.labels is None:
        raise ConfigError("k must be set for an unlabeled dataset")
    return ds.k


def hyperparams_from(cfg):
    return Hyperparams(
        gamma=cfg.gamma,
        lambda1=cfg.lambda1,
        lambda2=cfg.lambda2,
        structure_variant=cfg.structure_variant,
        zs_grad=cfg.zs_grad,
        fusion_in_loss=cfg.fusion_in_loss,
    )


def train_config_from(cfg):
    return TrainConfig(
        pretrain_epochs=cfg.pretrain_epochs,
        finetune_epochs=cfg.finetune_epochs,
        lr=cfg.lr,
        seed=cfg.seed,
        hyperparams=hyperparams_from(cfg),
        log_every=cfg.log_every,
    )


def fused_graph(state, mode):
    """The coefficient matrix handed to spectral clustering for one fusion
    mode; single-graph modes bypass fusion entirely."""
    if mode == "attribute_only":
        return state.coeff_attr.copy()
    if mode == "structure_only":
        return state.coeff_struct.copy()
    if mode == "equal":
        return 0.5 * state.coeff_attr + 0.5 * state.coeff_struct
    if mode == "adaptive":
        m = model.attention_weights(state.coeff_attr, state.coeff_struct, state.attn_w)
        return model.fuse(state.coeff_attr, state.coeff_struct, m)
    raise ConfigError(f"unknown fusion mode {mode!r}")


def cluster_and_score(c_f, ds, k, seed, topk):
    graph = spectral.postprocess_affinity(c_f, topk=topk or None)
    labels = spectral.cluster(graph, k, seed)
    if ds.labels is None:
        return None, labels
    return metrics.cluster_report(ds.labels, labels), labels


def _fmt(v):
    return repr(float(v))


def write_report_csv(path, report):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("acc,nmi,pur\n")
        if report is None:
            f.write(",,\n")
        else:
            f.write(f"{_fmt(report.acc)},{_fmt(report.nmi)},{_fmt(report.pur)}\n")


def write_labels_csv(path, labels):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("sample,label\n")
        for i, v in enumerate(labels):
            f.write(f"{i},{int(v)}\n")


def write_history_csv(path, pre_history, fine_history, hp):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("stage,epoch,ae,attr_reg,attr_se,struct_reg,struct_se,total\n")
        for epoch, loss in enumerate(pre_history):
            f.write(f"pretrain,{epoch},{_fmt(loss)},,,,,{_fmt(loss)}\n")
        for epoch, terms in enumerate(fine_history):
            f.write(
                f"finetune,{epoch},{_fmt(terms.ae)},{_fmt(terms.attr_reg)},"
                f"{_fmt(terms.attr_se)},{_fmt(terms.struct_reg)},"
                f"{_fmt(terms.struct_se)},{_fmt(terms.total(hp))}\n"
            )


def write_matrix_csv(path, mat):
    # 9 significant digits bounds the file size; checkpoints stay bit-exact
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in np.asarray(mat):
            f.write(",".join(f"{v:.9g}" for v in row))
            f.write("\n")


def _train_full(cfg, ds):
    tc = train_config_from(cfg)
    state = model.init_state(ds.n_features, cfg.hidden_dims, ds.n_samples, cfg.seed)
    state, pre_history = trainer.pretrain(state, ds, tc)
    state, fine_history = trainer.finetune(state, ds, tc)
    return state, pre_history, fine_history


def cmd_run(cfg):
    ds = load_dataset(cfg)
    k = resolve_k(cfg, ds)
    state, pre_history, fine_history = _train_full(cfg, ds)
    c_f = fused_graph(state, cfg.fusion)
    report, labels = cluster_and_score(c_f, ds, k, cfg.seed, cfg.topk)
    os.makedirs(cfg.out, exist_ok=True)
    write_report_csv(os.path.join(cfg.out, "report.csv"), report)
    write_labels_csv(os.path.join(cfg.out, "labels.csv"), labels)
    write_history_csv(
        os.path.join(cfg.out, "loss_history.csv"),
        pre_history,
        fine_history,
        hyperparams_from(cfg),
    )
    write_matrix_csv(os.path.join(cfg.out, "affinity.csv"), c_f)
    trainer.save_checkpoint(state, os.path.join(cfg.out, "checkpoint.bin"))
    if report is not None:
        log.info("run: acc=%.4f nmi=%.4f pur=%.4f", report.acc, report.nmi, report.pur)
    return report


def cmd_pretrain(cfg):
    ds = load_dataset(cfg)
    tc = train_config_from(cfg)
    state = model.init_state(ds.n_features, cfg.hidden_dims, ds.n_samples, cfg.seed)
    state, pre_history = trainer.pretrain(state, ds, tc)
    os.makedirs(cfg.out, exist_ok=True)
    write_history_csv(
        os.path.join(cfg.out, "loss_history.csv"), pre_history, [], hyperparams_from(cfg)
    )
    trainer.save_checkpoint(state, os.path.join(cfg.out, "checkpoint.bin"))
    return state


def cmd_finetune(cfg):
    ds = load_dataset(cfg)
    tc = train_config_from(cfg)
    if cfg.checkpoint:
        state = trainer.load_checkpoint(cfg.checkpoint)
        _check_dims(state, ds, resolve_k(cfg, ds))
    elif cfg.cold_start:
        state = model.init_state(ds.n_features, cfg.hidden_dims, ds.n_samples, cfg.seed)
    else:
        raise ConfigError("finetune needs checkpoint=PATH or cold_start=true")
    state, fine_history = trainer.finetune(state, ds, tc)
    os.makedirs(cfg.out, exist_ok=True)
    write_history_csv(
        os.path.join(cfg.out, "loss_history.csv"), [], fine_history, hyperparams_from(cfg)
    )
    trainer.save_checkpoint(state, os.path.join(cfg.out, "checkpoint.bin"))
    return state


def cmd_ablate(cfg):
    """Fusion-mode rows (shared training) then structure-variant rows
    (shared pre-training), one CSV row each."""
    ds = load_dataset(cfg)
    k = resolve_k(cfg, ds)
    tc = train_config_from(cfg)
    base = model.init_state(ds.n_features, cfg.hidden_dims, ds.n_samples, cfg.seed)
    base, _ = trainer.pretrain(base, ds, tc)

    def finetune_variant(variant):
        var_cfg = train_config_from(cfg)
        var_cfg.hyperparams.structure_variant = variant
        state, _ = trainer.finetune(base.copy(), ds, var_cfg)
        return state

    rows = []
    trained = {cfg.structure_variant: finetune_variant(cfg.structure_variant)}
    for mode in FUSION_MODES:
        c_f = fused_graph(trained[cfg.structure_variant], mode)
        report, _ = cluster_and_score(c_f, ds, k, cfg.seed, cfg.topk)
        rows.append((f"fusion_{mode}", mode, cfg.structure_variant, report))
    for variant in STRUCTURE_VARIANTS:
        if variant not in trained:
            trained[variant] = finetune_variant(variant)
        c_f = fused_graph(trained[variant], "adaptive")
        report, _ = cluster_and_score(c_f, ds, k, cfg.seed, cfg.topk)
        rows.append((f"structure_{variant}", "adaptive", variant, report))

    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "ablation.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("case,fusion,structure_variant,acc,nmi,pur\n")
        for case, mode, variant, report in rows:
            f.write(
                f"{case},{mode},{variant},{_fmt(report.acc)},"
                f"{_fmt(report.nmi)},{_fmt(report.pur)}\n"
            )
    return rows


def cmd_sweep(cfg):
    """One row per (lambda1, lambda2) grid cell, written in grid order.

    Cells share the seeded init and pre-training (neither depends on the
    lambdas) and fine-tune independent copies, optionally in parallel.
    """
    ds = load_dataset(cfg)
    k = resolve_k(cfg, ds)
    tc = train_config_from(cfg)
    base = model.init_state(ds.n_features, cfg.hidden_dims, ds.n_samples, cfg.seed)
    base, _ = trainer.pretrain(base, ds, tc)

    cells = [(l1, l2) for l1 in cfg.lambda1_grid for l2 in cfg.lambda2_grid]

    def run_cell(cell):
        l1, l2 = cell
        cell_cfg = train_config_from(cfg)
        cell_cfg.hyperparams.lambda1 = l1
        cell_cfg.hyperparams.lambda2 = l2
        state, _ = trainer.finetune(base.copy(), ds, cell_cfg)
        c_f = fused_graph(state, cfg.fusion)
        report, _ = cluster_and_score(c_f, ds, k, cfg.seed, cfg.topk)
        return report

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(run_cell, cells))
    else:
        reports = [run_cell(cell) for cell in cells]

    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "sweep.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("lambda1,lambda2,acc,nmi,pur\n")
        for (l1, l2), report in zip(cells, reports):
            f.write(
                f"{_fmt(l1)},{_fmt(l2)},{_fmt(report.acc)},"
                f"{_fmt(report.nmi)},{_fmt(report.pur)}\n"
            )
    return list(zip(cells, reports))


def _check_dims(state, ds, k):
    if state.input_dim != ds.n_features:
        raise ConfigError(
            f"checkpoint expects {state.input_dim} features, dataset has {ds.n_features}"
        )
    if state.n_samples != ds.n_samples:
        raise ConfigError(
            f"checkpoint built for n={state.n_samples} samples, dataset has {ds.n_samples}"
        )
    if k > ds.n_samples:
        raise ConfigError(f"k={k} exceeds the {ds.n_samples} available samples")


def cmd_eval(cfg):
    if not cfg.checkpoint:
        raise ConfigError("eval requires checkpoint=PATH")
    ds = load_dataset(cfg)
    k = resolve_k(cfg, ds)
    state = trainer.load_checkpoint(cfg.checkpoint)
    _check_dims(state, ds, k)
    c_f = fused_graph(state, cfg.fusion)
    report, labels = cluster_and_score(c_f, ds, k, cfg.seed, cfg.topk)
    os.makedirs(cfg.out, exist_ok=True)
    write_report_csv(os.path.join(cfg.out, "report.csv"), report)
    write_labels_csv(os.path.join(cfg.out, "labels.csv"), labels)
    return report


_COMMANDS = {
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "run": cmd_run,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dualse",
        description="Affinity-graph learning and spectral clustering experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value config file")
        for key in config_keys():
            p.add_argument(f"--{key}", default=None, metavar="V")
    return parser


def parse_args(argv):
    args = build_parser().parse_args(argv)
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key in config_keys() and value is not None
    }
    return args.command, build_config(file_values, overrides)


def main(argv=None):
    setup_logging()
    try:
        command, cfg = parse_args(argv if argv is not None else sys.argv[1:])
        _COMMANDS[command](cfg)
    except DualSEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
