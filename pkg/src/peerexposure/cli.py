"""Command line: generate graphs, simulate outcomes, train/infer, check gradients, reproduce tables."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import InputError, NumericError, TrainingError
from .graph import read_graph, write_graph
from .harness import exposure_correlation, load_spec, pehe, preset, reproduce, run_experiment, rows_to_csv
from .model import TrainConfig, fit_tuned, infer, load_checkpoint, save_checkpoint
from .netgen import NetGenConfig, augment_noise, generate
from .sim import MECHANISMS, SimConfig, read_sim_csv, simulate, write_sim_csv


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def cmd_generate(args) -> int:
    cfg = NetGenConfig(
        model=args.model,
        n=args.n,
        ba_m=args.ba_m,
        ws_k=args.ws_k,
        ws_p=args.ws_p,
        sbm_blocks=args.sbm_blocks,
        sbm_avg_degree=args.sbm_avg_degree,
        attr_dim=args.attr_dim,
        edge_dim=args.edge_dim,
        seed=args.seed,
    )
    g = generate(cfg)
    if args.noise:
        g = augment_noise(g, args.noise, args.seed)
    write_graph(g, args.out)
    print(f"wrote {args.out}: n={g.n} edges={g.num_edges} fx={g.fx} fz={g.fz}")
    return 0


def cmd_simulate(args) -> int:
    g = read_graph(args.graph)
    cfg = SimConfig(
        mechanism=args.mechanism,
        tau_c=args.tau_c,
        tau_d=args.tau_d,
        tau_em=args.tau_em,
        delta_exp=args.delta_exp,
        delta_em=args.delta_em,
        conf_subset=_ints(args.conf_subset),
        em_subset=_ints(args.em_subset),
        noise_sd=args.noise_sd,
        seed=args.seed,
    )
    sim = simulate(g, cfg)
    write_sim_csv(sim, args.out)
    print(f"wrote {args.out}: treated={int(sim.t.sum())}/{g.n} mean hpe={sim.hpe_true.mean():.4f}")
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        head=args.head,
        exposure=args.exposure,
        epochs=args.epochs,
        lr_gnn=args.lr_gnn,
        lr_gnn_grid=tuple(args.lr_gnn_grid or ()),
        lr_head=args.lr_head,
        lambda_bal=args.lambda_bal,
        d_e=args.d_e,
        use_mask=not args.no_mask,
        use_feat_encoder=not args.no_feat_encoder,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    g = read_graph(args.graph)
    sim = read_sim_csv(args.sim)
    if len(sim.t) != g.n:
        raise InputError(f"simulation has {len(sim.t)} units but the graph has {g.n} nodes")
    state = fit_tuned(g, sim, _train_config(args))
    save_checkpoint(state, args.out)
    est = infer(state, g, sim.t)
    print(
        f"wrote {args.out}: lr_gnn {state.config.lr_gnn:g}, best epoch {state.epoch}, "
        f"held-out factual loss {state.heldout_loss:.4f}"
    )
    print(f"in-sample pehe {pehe(sim.hpe_true, est.hpe):.4f}")
    return 0


def cmd_infer(args) -> int:
    g = read_graph(args.graph)
    sim = read_sim_csv(args.sim)
    state = load_checkpoint(args.model)
    est = infer(state, g, sim.t)
    lines = ["node,hpe_hat,hpe_true"]
    lines += [f"{i},{h!r},{tr!r}" for i, (h, tr) in enumerate(zip(est.hpe.tolist(), sim.hpe_true.tolist()))]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    r = exposure_correlation(est.rho, sim.rho_true)
    print(f"pehe {pehe(sim.hpe_true, est.hpe):.4f}  |r|(rho_hat, rho) {'n/a' if r is None else f'{r:.3f}'}", file=sys.stderr)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCE, format_results, run_suite

    results = run_suite(seed=args.seed, names=args.only)
    print(format_results(results))
    return 0 if all(r.ok(TOLERANCE) for r in results) else 1


def cmd_reproduce(args) -> int:
    if args.spec:
        spec = load_spec(args.spec)
        rows = run_experiment(spec, workers=args.workers)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{spec.name}.csv").write_text(rows_to_csv(rows, args.timing))
        print(out / f"{spec.name}.csv")
        return 0
    if args.dry_run:
        for spec in preset(args.rq, args.scale):
            print(f"{spec.name}: {spec.num_cells()} runs")
        return 0
    for path in reproduce(args.rq, args.scale, args.out, workers=args.workers, timing=args.timing):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peerexposure", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an attributed random graph")
    p.add_argument("--model", default="ba", choices=["ba", "ws", "sbm", "BA", "WS", "SBM"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--ba-m", type=int, default=5)
    p.add_argument("--ws-k", type=int, default=6)
    p.add_argument("--ws-p", type=float, default=0.5)
    p.add_argument("--sbm-blocks", type=int, default=100)
    p.add_argument("--sbm-avg-degree", type=float, default=10.0)
    p.add_argument("--attr-dim", type=int, default=10)
    p.add_argument("--edge-dim", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0, help="fraction of edges to add (>0) or remove (<0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="simulate treatments and outcomes on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--mechanism", default="mutual", choices=MECHANISMS)
    p.add_argument("--tau-c", type=float, default=0.5)
    p.add_argument("--tau-d", type=float, default=1.0)
    p.add_argument("--tau-em", type=float, default=0.5)
    p.add_argument("--delta-exp", type=float, default=1.0)
    p.add_argument("--delta-em", type=float, default=1.0)
    p.add_argument("--conf-subset", default="0 1 2 3 4")
    p.add_argument("--em-subset", default="", help="effect-modifier attribute columns (semi-synthetic mode)")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit an estimator and write a checkpoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--head", default="tarnet", choices=["tarnet", "cfr"])
    p.add_argument("--exposure", default="egonet", choices=["egonet", "fraction", "motif"])
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr-gnn", type=float, default=TrainConfig.lr_gnn)
    p.add_argument("--lr-gnn-grid", type=float, nargs="+", metavar="LR", help="select lr_gnn by held-out loss")
    p.add_argument("--lr-head", type=float, default=TrainConfig.lr_head)
    p.add_argument("--lambda-bal", type=float, default=TrainConfig.lambda_bal)
    p.add_argument("--d-e", type=int, default=TrainConfig.d_e)
    p.add_argument("--no-mask", action="store_true")
    p.add_argument("--no-feat-encoder", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="estimate peer effects with a trained checkpoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="+", metavar="CASE", help="run only these named cases")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("reproduce", help="run a research-question preset or an experiment spec file")
    p.add_argument("rq", nargs="?", default="rq1", choices=["rq1", "rq2", "rq3", "rq4"])
    p.add_argument("--scale", default="desk", choices=["desk", "full"])
    p.add_argument("--spec", help="experiment spec file; overrides the preset")
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="fill runtime_s (makes the CSV run-dependent)")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    try:
        return args.func(args)
    except (InputError, NumericError, TrainingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
