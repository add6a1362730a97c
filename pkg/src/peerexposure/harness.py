"""Metrics, seeded multi-run experiments and result files.

An experiment crosses networks x mechanisms x settings x seeds x estimators.
Each cell generates the graph and simulation from its seed, fits one
estimator, and scores the estimated peer effects against the simulated truth.
Cells are independent, so they may run in worker processes; rows are sorted
before writing so the CSV does not depend on scheduling.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import fraction_exposure
from .errors import InputError
from .model import TrainConfig, fit_tuned, infer
from .netgen import NetGenConfig, augment_noise, generate
from .sim import MECHANISMS, SimConfig, simulate

log = logging.getLogger(__name__)

ESTIMATORS: dict[str, dict] = {
    "egonet-tarnet": {"exposure": "egonet", "head": "tarnet"},
    "egonet-cfr": {"exposure": "egonet", "head": "cfr"},
    "egonet-nomask": {"exposure": "egonet", "head": "tarnet", "use_mask": False},
    "egonet-nofeat": {"exposure": "egonet", "head": "tarnet", "use_mask": False, "use_feat_encoder": False},
    "fraction": {"exposure": "fraction", "head": "tarnet"},
    "motif": {"exposure": "motif", "head": "tarnet"},
}

DESK = {"n": 1000, "epochs": 60, "lr_gnn_grid": ()}
FULL = {"n": 3000, "epochs": 100, "lr_gnn_grid": (0.1, 0.04, 0.02, 0.01)}


# -- metrics ---------------------------------------------------------------


def pehe(true_hpe, est_hpe) -> float:
    """Root mean squared error between true and estimated peer effects."""
    a = np.asarray(true_hpe, dtype=np.float64).ravel()
    b = np.asarray(est_hpe, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.size} true vs {b.size} estimated effects")
    if a.size == 0:
        raise InputError("pehe needs at least one unit")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def exposure_correlation(rho_hat, rho) -> float | None:
    """Largest |Pearson r| between any column of ``rho_hat`` and ``rho``.

    None when fewer than two units, when ``rho`` is constant, or when every
    column of ``rho_hat`` is constant.
    """
    y = np.asarray(rho, dtype=np.float64).ravel()
    x = np.asarray(rho_hat, dtype=np.float64)
    x = x.reshape(len(x), -1)
    if x.shape[0] != y.size:
        raise InputError(f"length mismatch: {x.shape[0]} vs {y.size}")
    if y.size < 2:
        return None
    yc = y - y.mean()
    ny = np.sqrt(yc @ yc)
    if ny == 0:
        return None
    best = None
    for col in x.T:
        xc = col - col.mean()
        nx = np.sqrt(xc @ xc)
        if nx == 0:
            continue
        r = min(abs(float(xc @ yc / (nx * ny))), 1.0)
        best = r if best is None else max(best, r)
    return best


# -- specs -----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to regenerate a result table."""

    name: str = "experiment"
    networks: tuple[NetGenConfig, ...] = (NetGenConfig(),)
    mechanisms: tuple[str, ...] = ("mutual",)
    estimators: tuple[str, ...] = ("egonet-tarnet",)
    seeds: tuple[int, ...] = (0,)
    sim: SimConfig = SimConfig()
    train: TrainConfig = TrainConfig()
    lambda_bal_grid: tuple[float, ...] = ()
    d_e_grid: tuple[int, ...] = ()
    noise_grid: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.seeds:
            raise InputError("an experiment needs at least one seed")
        if not self.estimators:
            raise InputError("an experiment needs at least one estimator")
        if not self.networks:
            raise InputError("an experiment needs at least one network")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise InputError(f"unknown estimator {e!r}; choose from {sorted(ESTIMATORS)}")
        for m in self.mechanisms:
            if m not in MECHANISMS:
                raise InputError(f"unknown mechanism {m!r}")

    def settings(self) -> list[tuple[str, dict]]:
        """(label suffix, overrides) pairs; the base setting comes first and is always present."""
        out: list[tuple[str, dict]] = [("", {})]
        out += [(f"[lambda_bal={v:g}]", {"lambda_bal": float(v)}) for v in self.lambda_bal_grid]
        out += [(f"[d_e={int(v)}]", {"d_e": int(v)}) for v in self.d_e_grid]
        out += [(f"[noise={v:+g}]", {"noise": float(v)}) for v in self.noise_grid]
        return out

    def num_cells(self) -> int:
        return len(self.networks) * len(self.mechanisms) * len(self.settings()) * len(self.seeds) * len(self.estimators)


def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise InputError(f"not a boolean: {text!r}")
    if isinstance(default, tuple):
        return tuple(_number(v) for v in text.replace(",", " ").split())
    if default is None:
        return None if text.lower() in ("", "none") else _number(text)
    try:
        return type(default)(text)
    except ValueError as exc:
        raise InputError(f"bad value {text!r}: {exc}") from exc


def _number(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise InputError(f"not a number: {text!r}") from exc


def _section_to(cls, section, base=None):
    base = base if base is not None else cls()
    known = {f.name: getattr(base, f.name) for f in fields(cls)}
    updates = {}
    for key, text in section.items():
        if key not in known:
            raise InputError(f"unknown key {key!r} for {cls.__name__}")
        updates[key] = _parse_value(text, known[key])
    return replace(base, **updates)


def _words(text: str) -> tuple[str, ...]:
    return tuple(text.replace(",", " ").split())


def parse_spec(text: str) -> ExperimentSpec:
    """Parse an INI-style experiment description.

    Sections: ``[experiment]`` (name, seeds, estimators, mechanisms and the
    grids), ``[sim]``, ``[train]`` and one ``[network.<label>]`` per graph.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InputError(f"bad experiment spec: {exc}") from exc
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    nets = tuple(_section_to(NetGenConfig, cp[s]) for s in cp.sections() if s.startswith("network"))
    kwargs = {
        "name": ex.get("name", "experiment").strip(),
        "networks": nets or (NetGenConfig(),),
        "mechanisms": _words(ex.get("mechanisms", "mutual")),
        "estimators": _words(ex.get("estimators", "egonet-tarnet")),
        "seeds": tuple(int(s) for s in _words(ex.get("seeds", "0"))),
        "lambda_bal_grid": tuple(float(v) for v in _words(ex.get("lambda_bal_grid", ""))),
        "d_e_grid": tuple(int(v) for v in _words(ex.get("d_e_grid", ""))),
        "noise_grid": tuple(float(v) for v in _words(ex.get("noise_grid", ""))),
        "sim": _section_to(SimConfig, cp["sim"]) if cp.has_section("sim") else SimConfig(),
        "train": _section_to(TrainConfig, cp["train"]) if cp.has_section("train") else TrainConfig(),
    }
    unknown = set(ex) - {"name", "mechanisms", "estimators", "seeds", "lambda_bal_grid", "d_e_grid", "noise_grid"}
    if unknown:
        raise InputError(f"unknown [experiment] keys: {sorted(unknown)}")
    return ExperimentSpec(**kwargs)


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    return "none" if v is None else str(v)


def dump_spec(spec: ExperimentSpec) -> str:
    def fmt(values):
        return " ".join(_format_value(v) for v in values)

    lines = [
        "[experiment]",
        f"name = {spec.name}",
        f"seeds = {fmt(spec.seeds)}",
        f"estimators = {fmt(spec.estimators)}",
        f"mechanisms = {fmt(spec.mechanisms)}",
        f"lambda_bal_grid = {fmt(spec.lambda_bal_grid)}",
        f"d_e_grid = {fmt(spec.d_e_grid)}",
        f"noise_grid = {fmt(spec.noise_grid)}",
    ]
    for i, net in enumerate(spec.networks):
        lines += ["", f"[network.{i}.{net.label}]"]
        lines += [f"{f.name} = {_format_value(getattr(net, f.name))}" for f in fields(net)]
    for title, obj in (("sim", spec.sim), ("train", spec.train)):
        lines += ["", f"[{title}]"]
        lines += [f"{f.name} = {_format_value(getattr(obj, f.name))}" for f in fields(obj)]
    return "\n".join(lines) + "\n"


def load_spec(path: str | Path) -> ExperimentSpec:
    return parse_spec(Path(path).read_text())


# -- running ---------------------------------------------------------------


@dataclass
class ResultRow:
    seed: int
    network: str
    mechanism: str
    estimator: str
    pehe: float | None = None
    runtime_s: float | None = None
    corr_rho: float | None = None
    corr_rho_cf: float | None = None
    corr_baseline: float | None = None
    error: str = ""


COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass(frozen=True)
class Cell:
    network: NetGenConfig
    mechanism: str
    estimator: str
    suffix: str
    overrides: dict = field(hash=False, compare=False, default_factory=dict)
    seed: int = 0
    sim: SimConfig = SimConfig()
    train: TrainConfig = TrainConfig()


def cells(spec: ExperimentSpec) -> list[Cell]:
    out = []
    for net in spec.networks:
        for mech in spec.mechanisms:
            for suffix, overrides in spec.settings():
                for seed in spec.seeds:
                    for est in spec.estimators:
                        out.append(Cell(net, mech, est, suffix, overrides, seed, spec.sim, spec.train))
    return out


_DATA_CACHE: dict = {}


def _graph_and_sim(net: NetGenConfig, sim_cfg: SimConfig, seed: int):
    key = (net, sim_cfg, seed)
    if key not in _DATA_CACHE:
        if len(_DATA_CACHE) > 8:
            _DATA_CACHE.clear()
        g = generate(replace(net, seed=seed))
        _DATA_CACHE[key] = (g, simulate(g, replace(sim_cfg, seed=seed)))
    return _DATA_CACHE[key]


def train_config_for(base: TrainConfig, estimator: str, seed: int, overrides: dict | None = None) -> TrainConfig:
    opts = dict(ESTIMATORS[estimator])
    opts.update({k: v for k, v in (overrides or {}).items() if k != "noise"})
    return replace(base, seed=seed, **opts)


def run_cell(cell: Cell) -> ResultRow:
    noise = cell.overrides.get("noise", 0.0)
    network = cell.network.label + (f"+noise{noise:+g}" if noise else "")
    row = ResultRow(cell.seed, network, cell.mechanism, cell.estimator + cell.suffix)
    start = time.perf_counter()
    try:
        g, sim = _graph_and_sim(cell.network, replace(cell.sim, mechanism=cell.mechanism), cell.seed)
        # outcomes come from the clean graph; the estimator only sees the perturbed one
        g_fit = augment_noise(g, noise, cell.seed) if noise else g
        cfg = train_config_for(cell.train, cell.estimator, cell.seed, cell.overrides)
        state = fit_tuned(g_fit, sim, cfg)
        est = infer(state, g_fit, sim.t)
        row.pehe = pehe(sim.hpe_true, est.hpe)
        row.corr_rho = exposure_correlation(est.rho, sim.rho_true)
        row.corr_rho_cf = exposure_correlation(est.rho_cf, sim.rho_true_cf)
        row.corr_baseline = exposure_correlation(fraction_exposure(g_fit, sim.t), sim.rho_true)
    except Exception as exc:  # noqa: BLE001 - recorded on the row, the run carries on
        log.warning("cell %s/%s/%s seed %d failed: %s", network, cell.mechanism, row.estimator, cell.seed, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    row.runtime_s = time.perf_counter() - start
    return row


def _row_key(row: ResultRow):
    return (row.seed, row.network, row.mechanism, row.estimator)


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress=None) -> list[ResultRow]:
    """Run every cell; rows come back sorted by (seed, network, mechanism, estimator)."""
    todo = cells(spec)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = []
            for row in pool.map(run_cell, todo):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        rows = []
        for c in todo:
            rows.append(run_cell(c))
            if progress:
                progress(rows[-1])
    return sorted(rows, key=_row_key)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[ResultRow], timing: bool = False) -> str:
    """CSV text in ResultRow field order. ``runtime_s`` stays empty unless ``timing``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        d = dataclasses.asdict(r)
        if not timing:
            d["runtime_s"] = None
        w.writerow([_fmt(d[c]) for c in COLUMNS])
    return buf.getvalue()


def write_results(rows: list[ResultRow], path: str | Path, timing: bool = False) -> None:
    Path(path).write_text(rows_to_csv(rows, timing))


def read_results(path: str | Path) -> list[ResultRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            def num(key):
                return float(rec[key]) if rec.get(key) else None

            out.append(
                ResultRow(
                    int(rec["seed"]),
                    rec["network"],
                    rec["mechanism"],
                    rec["estimator"],
                    num("pehe"),
                    num("runtime_s"),
                    num("corr_rho"),
                    num("corr_rho_cf"),
                    num("corr_baseline"),
                    rec.get("error", ""),
                )
            )
    return out


# -- aggregation -----------------------------------------------------------


@dataclass
class Summary:
    network: str
    mechanism: str
    estimator: str
    count: int
    pehe_mean: float | None
    pehe_sd: float | None
    corr_rho_mean: float | None
    corr_rho_sd: float | None
    corr_baseline_mean: float | None
    corr_baseline_sd: float | None
    failures: int = 0


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), (float(a.std(ddof=1)) if a.size > 1 else None)


def aggregate(rows: list[ResultRow]) -> list[Summary]:
    """Mean and sample standard deviation per (network, mechanism, estimator) over seeds."""
    groups: dict[tuple[str, str, str], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.network, r.mechanism, r.estimator), []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        ok = [r for r in rs if not r.error]
        pm, ps = _mean_sd([r.pehe for r in ok if r.pehe is not None])
        cm, cs = _mean_sd([r.corr_rho for r in ok if r.corr_rho is not None])
        bm, bs = _mean_sd([r.corr_baseline for r in ok if r.corr_baseline is not None])
        out.append(Summary(*key, len(ok), pm, ps, cm, cs, bm, bs, len(rs) - len(ok)))
    return out


def summary_to_csv(summary: list[Summary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(Summary)]
    w.writerow(names)
    for s in summary:
        w.writerow([_fmt(getattr(s, n)) for n in names])
    return buf.getvalue()


def summary_to_dat(summary: list[Summary]) -> str:
    """Whitespace-separated table for gnuplot; one block per (network, mechanism)."""
    lines = ["# estimator pehe_mean pehe_sd corr_rho_mean corr_baseline_mean"]
    last = None
    for s in summary:
        if (s.network, s.mechanism) != last:
            if last is not None:
                lines += ["", ""]
            lines.append(f"# {s.network} {s.mechanism}")
            last = (s.network, s.mechanism)

        def num(v):
            return "NaN" if v is None else f"{v:.6g}"

        lines.append(
            f"{s.estimator} {num(s.pehe_mean)} {num(s.pehe_sd)} {num(s.corr_rho_mean)} {num(s.corr_baseline_mean)}"
        )
    return "\n".join(lines) + "\n"


# -- research-question presets ---------------------------------------------

SEEDS = (0, 1, 2, 3, 4)


def preset(rq: str, scale: str = "desk") -> list[ExperimentSpec]:
    """Experiment specs for one research question at ``desk`` or ``full`` scale."""
    if scale not in ("desk", "full"):
        raise InputError(f"scale must be 'desk' or 'full', got {scale!r}")
    size = DESK if scale == "desk" else FULL
    train = TrainConfig(epochs=size["epochs"], lr_gnn_grid=size["lr_gnn_grid"])
    n = size["n"]

    def ba(m: int) -> NetGenConfig:
        return NetGenConfig(model="BA", n=n, ba_m=m)

    if rq == "rq1":
        return [
            ExperimentSpec(
                name="rq1",
                networks=(ba(1), ba(5), ba(10)),
                mechanisms=("mutual", "clustering", "attr_sim"),
                estimators=("egonet-tarnet", "fraction", "motif"),
                seeds=SEEDS,
                train=train,
            )
        ]
    if rq == "rq2":
        # attribute-rich block-structured graphs stand in for real social networks
        net = NetGenConfig(model="SBM", n=n, sbm_blocks=max(n // 10, 2), attr_dim=50)
        return [
            ExperimentSpec(
                name="rq2",
                networks=(net,),
                mechanisms=("mutual", "clustering", "components", "attr_sim"),
                estimators=("egonet-tarnet", "egonet-cfr", "fraction", "motif"),
                seeds=SEEDS,
                sim=SimConfig(em_subset=(5, 6, 7, 8, 9)),
                train=train,
            )
        ]
    if rq == "rq3":
        return [
            ExperimentSpec(
                name="rq3-ablation",
                networks=(ba(5),),
                mechanisms=("mutual", "clustering", "attr_sim"),
                estimators=("egonet-tarnet", "egonet-nomask", "egonet-nofeat"),
                seeds=SEEDS,
                train=train,
            ),
            ExperimentSpec(
                name="rq3-sensitivity",
                networks=(ba(5),),
                mechanisms=("mutual",),
                estimators=("egonet-tarnet",),
                seeds=SEEDS,
                train=train,
                lambda_bal_grid=(0.0, 0.1, 1.0),
                d_e_grid=(1, 5),
                noise_grid=(-0.1, -0.05, 0.05, 0.1),
            ),
        ]
    if rq == "rq4":
        return [
            ExperimentSpec(
                name="rq4",
                networks=(ba(5),),
                mechanisms=MECHANISMS,
                estimators=("egonet-tarnet",),
                seeds=SEEDS,
                sim=SimConfig(delta_em=0.0),
                train=train,
            )
        ]
    raise InputError(f"unknown research question {rq!r}; choose rq1, rq2, rq3 or rq4")


def reproduce(rq: str, scale: str, out_dir: str | Path, workers: int = 1, timing: bool = False) -> list[Path]:
    """Run a preset and write ``<name>.csv``, ``<name>.spec``, ``<name>_summary.csv`` and ``<name>.dat``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in preset(rq, scale):
        rows = run_experiment(spec, workers=workers)
        summary = aggregate(rows)
        files = {
            f"{spec.name}.spec": dump_spec(spec),
            f"{spec.name}.csv": rows_to_csv(rows, timing),
            f"{spec.name}_summary.csv": summary_to_csv(summary),
            f"{spec.name}.dat": summary_to_dat(summary),
        }
        for name, text in files.items():
            (out / name).write_text(text)
            written.append(out / name)
    return written
