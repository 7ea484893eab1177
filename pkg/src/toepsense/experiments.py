"""Experiment harness: reproducible studies with chart-ready output.

Every run is a pure function of its ExperimentConfig.  Per-cell seed streams
are derived by injectively packing (experiment tag, matrix kind, k, trial,
part) into a stream id, so permuting the k grid or the parallel schedule
cannot change any cell's result.  Wall-clock timings are reported in a
separate sidecar (timings.csv) because they are excluded from the
determinism guarantees; results.csv and results.json are byte-reproducible.

Sparsity and measurement count are often written with the same symbol in
this problem area; here ``m`` is always the sparsity and ``k`` the number of
measurements.
"""

from __future__ import annotations

import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .operators import KINDS, SYMMETRIC_KINDS, build_operator
from .pgm import ImageGray, write_pgm
from .pipelines import (
    convolve_and_measure,
    identify_system,
    make_probe,
    probe_to_csv,
    recover_pwc,
    vector_to_csv,
)
from .randgen import (
    DIST_KINDS,
    DistributionSpec,
    EntryStream,
    ParameterError,
    SeedSpec,
    draw_rademacher_spikes,
    sample_without_replacement,
)
from .recovery import SolverConfig, basis_pursuit, judge_success, mse_frobenius
from .riplab import (
    BudgetExceededError,
    dependency_graph,
    equitable_coloring,
    make_theory_params,
    rip_exact,
    rip_monte_carlo,
    theory_bounds,
    verify_decomposition,
)
from .svgchart import line_chart

EXPERIMENTS = ("sweep", "image", "sysid", "pwc", "rip_audit")

_PACK = 1_000_003
_TAGS = {name: i + 1 for i, name in enumerate(EXPERIMENTS)}
PART_OPERATOR, PART_SIGNAL, PART_SUBSET, PART_PROBES = 0, 1, 2, 3

CSV_VERSION = "v1"


def pack_stream(*parts: int) -> int:
    """Injective stream id for small non-negative parts (< 1_000_002).

    Packs of different lengths occupy disjoint ranges, so (tag, kind, k,
    trial, part) tuples never collide with shorter derivations.
    """
    sid = 0
    for v in parts:
        v = int(v)
        if not 0 <= v < _PACK - 1:
            raise ParameterError(f"stream part {v} out of packing range")
        sid = sid * _PACK + v + 1
    return sid


def cell_seed(master_seed: int, experiment: str, kind: str, k: int, trial: int, part: int) -> SeedSpec:
    return SeedSpec(
        master_seed,
        pack_stream(_TAGS[experiment], KINDS.index(kind), k, trial, part),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; serializes to run-config.json."""

    experiment: str
    n: int = 512
    m: int = 20
    k_grid: tuple[int, ...] = (60, 80, 100, 120, 140, 160, 180, 200, 220, 240, 260)
    trials: int = 100
    matrix_kinds: tuple[str, ...] = ("toeplitz", "sym_toeplitz")
    dist: str = "gaussian"
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    width: int = 64
    height: int = 64
    delta3m: float = 0.3
    monte_carlo: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if list(self.k_grid) != sorted(self.k_grid):
            raise ParameterError("k_grid must be sorted ascending")
        for kind in self.matrix_kinds:
            if kind not in KINDS:
                raise ParameterError(f"unknown matrix kind {kind!r}")
        if self.dist not in DIST_KINDS:
            raise ParameterError(f"unknown distribution {self.dist!r}")
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        object.__setattr__(self, "matrix_kinds", tuple(self.matrix_kinds))
        if isinstance(self.solver, dict):
            object.__setattr__(self, "solver", SolverConfig(**self.solver))

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["k_grid"] = list(self.k_grid)
        doc["matrix_kinds"] = list(self.matrix_kinds)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "solver" in doc and isinstance(doc["solver"], dict):
            doc["solver"] = SolverConfig(**doc["solver"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ResultRow:
    matrix_kind: str
    k: int
    trials: int
    successes: int
    success_rate: float
    mean_relative_error: float
    mean_solve_seconds: float


@dataclass
class ExperimentResult:
    """Run output: aggregate rows plus ready-to-write artifact files."""

    config: ExperimentConfig
    rows: list
    artifacts: dict[str, bytes]

    def write_to(self, out_dir) -> list[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, blob in sorted(self.artifacts.items()):
            (out / name).write_bytes(blob)
            written.append(str(out / name))
        return written


def _rows_csv(rows: list[ResultRow], experiment: str) -> str:
    lines = [
        f"# toepsense {experiment} results {CSV_VERSION}",
        "matrix_kind,k,trials,successes,success_rate,mean_relative_error",
    ]
    for r in rows:
        lines.append(
            f"{r.matrix_kind},{r.k},{r.trials},{r.successes},"
            f"{r.success_rate:.6f},{r.mean_relative_error:.12e}"
        )
    return "\n".join(lines) + "\n"


def _timings_csv(rows: list[ResultRow], experiment: str) -> str:
    lines = [
        f"# toepsense {experiment} timings {CSV_VERSION} (not covered by determinism)",
        "matrix_kind,k,mean_solve_seconds",
    ]
    lines += [f"{r.matrix_kind},{r.k},{r.mean_solve_seconds:.6f}" for r in rows]
    return "\n".join(lines) + "\n"


def _rows_json(rows: list[ResultRow], experiment: str) -> str:
    doc = {
        "experiment": experiment,
        "rows": [
            {
                "matrix_kind": r.matrix_kind,
                "k": r.k,
                "trials": r.trials,
                "successes": r.successes,
                "success_rate": r.success_rate,
                "mean_relative_error": r.mean_relative_error,
            }
            for r in rows
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _rate_chart(rows: list[ResultRow], title: str) -> str:
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        series.setdefault(r.matrix_kind, []).append((float(r.k), r.success_rate))
    return line_chart(
        series, title, "measurement count k", "success rate", y_range=(0.0, 1.0)
    )


def _aggregate(cells: list[tuple], trials: int) -> list[ResultRow]:
    """cells: (kind, k, trial, success, rel_err, seconds), any order."""
    cells = sorted(cells, key=lambda c: (KINDS.index(c[0]), c[1], c[2]))
    rows = []
    by_key: dict[tuple, list] = {}
    for c in cells:
        by_key.setdefault((c[0], c[1]), []).append(c)
    for (kind, k), group in sorted(by_key.items(), key=lambda kv: (KINDS.index(kv[0][0]), kv[0][1])):
        succ = sum(1 for c in group if c[3])
        rows.append(
            ResultRow(
                matrix_kind=kind,
                k=k,
                trials=trials,
                successes=succ,
                success_rate=succ / trials,
                mean_relative_error=float(np.mean([c[4] for c in group])),
                mean_solve_seconds=float(np.mean([c[5] for c in group])),
            )
        )
    return rows


# -- sweep ---------------------------------------------------------------------


def _sweep_cell(task) -> tuple:
    n, m, kind, k, trial, master_seed, dist_kind, solver = task
    op = build_operator(
        kind,
        k,
        n,
        dist=DistributionSpec(dist_kind, k),
        seed=cell_seed(master_seed, "sweep", kind, k, trial, PART_OPERATOR),
    )
    x = draw_rademacher_spikes(
        n, m, cell_seed(master_seed, "sweep", kind, k, trial, PART_SIGNAL)
    )
    y = op.apply(x.to_dense())
    t0 = time.perf_counter()
    res = basis_pursuit(op, y, solver)
    seconds = time.perf_counter() - t0
    truth = x.to_dense()
    rel = float(np.linalg.norm(res.x_hat - truth) / np.linalg.norm(truth))
    return (kind, k, trial, judge_success(x, res.x_hat, solver.success_rel_tol), rel, seconds)


def _run_cells(tasks: list[tuple], worker, workers: int) -> list[tuple]:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, tasks, chunksize=4))
    return [worker(t) for t in tasks]


def run_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Success rate vs measurement count: fresh operator and fresh m-sparse
    +-1 signal per (kind, k, trial) cell, basis pursuit, closed-threshold
    success judgement."""
    tasks = [
        (cfg.n, cfg.m, kind, k, trial, cfg.master_seed, cfg.dist, cfg.solver)
        for kind in cfg.matrix_kinds
        for k in cfg.k_grid
        for trial in range(cfg.trials)
    ]
    cells = _run_cells(tasks, _sweep_cell, cfg.workers)
    rows = _aggregate(cells, cfg.trials)
    artifacts = {
        "results.csv": _rows_csv(rows, "sweep").encode(),
        "results.json": _rows_json(rows, "sweep").encode(),
        "timings.csv": _timings_csv(rows, "sweep").encode(),
        "chart.svg": _rate_chart(rows, "Exact recovery rate vs measurement count").encode(),
        "run-config.json": cfg.to_json().encode(),
    }
    return ExperimentResult(config=cfg, rows=rows, artifacts=artifacts)


# -- image reconstruction ---------------------------------------------------------


def synthetic_sparse_image(
    width: int, height: int, m: int, seed: SeedSpec
) -> ImageGray:
    """Sparse grayscale test image: m uniformly placed pixels with uniform
    intensities in [0.2, 1], zero elsewhere."""
    n = width * height
    if not 1 <= m <= n:
        raise ParameterError("need 1 <= m <= width*height")
    stream = EntryStream(seed)
    support = sample_without_replacement(n, m, stream)
    intensity = 0.2 + 0.8 * stream.uniform(m)
    pixels = np.zeros(n)
    pixels[support] = intensity
    return ImageGray(width=width, height=height, pixels=pixels.reshape(height, width))


def run_image(cfg: ExperimentConfig, image: ImageGray | None = None) -> ExperimentResult:
    """Measure a (synthetic or provided) image with each operator kind at
    each k, recover by basis pursuit, report MSE = ||X-M||_F / ||M||_F."""
    if image is None:
        image = synthetic_sparse_image(
            cfg.width,
            cfg.height,
            cfg.m,
            SeedSpec(cfg.master_seed, pack_stream(_TAGS["image"], PART_SIGNAL)),
        )
    n = image.width * image.height
    vec = image.pixels.reshape(-1)
    if float(np.linalg.norm(vec)) == 0.0:
        raise ParameterError("image has zero Frobenius norm; MSE is undefined")
    reports = []
    artifacts: dict[str, bytes] = {}
    timing_lines = [
        f"# toepsense image timings {CSV_VERSION} (not covered by determinism)",
        "matrix_kind,k,solve_seconds",
    ]
    for kind in cfg.matrix_kinds:
        for k in cfg.k_grid:
            if k > n:
                raise ParameterError(f"k={k} exceeds pixel count n={n}")
            op = build_operator(
                kind,
                k,
                n,
                dist=DistributionSpec(cfg.dist, k),
                seed=cell_seed(cfg.master_seed, "image", kind, k, 0, PART_OPERATOR),
            )
            y = op.apply(vec)
            t0 = time.perf_counter()
            res = basis_pursuit(op, y, cfg.solver)
            seconds = time.perf_counter() - t0
            recon = res.x_hat.reshape(image.height, image.width)
            mse = mse_frobenius(recon, image.pixels)
            reports.append(
                {
                    "matrix_kind": kind,
                    "k": k,
                    "mse": mse,
                    "iters": res.iters,
                    "residual": res.residual,
                    "converged": res.converged,
                }
            )
            timing_lines.append(f"{kind},{k},{seconds:.6f}")
            quant = ImageGray(
                width=image.width,
                height=image.height,
                pixels=np.clip(recon, 0.0, 1.0),
            )
            artifacts[f"recon_{kind}_k{k}.pgm"] = write_pgm(quant)
    csv_lines = [
        f"# toepsense image results {CSV_VERSION}",
        "matrix_kind,k,mse,iters,residual,converged",
    ]
    for r in reports:
        csv_lines.append(
            f"{r['matrix_kind']},{r['k']},{r['mse']:.12e},{r['iters']},"
            f"{r['residual']:.12e},{int(r['converged'])}"
        )
    artifacts["results.csv"] = ("\n".join(csv_lines) + "\n").encode()
    artifacts["results.json"] = (
        json.dumps({"experiment": "image", "rows": reports}, sort_keys=True, indent=2) + "\n"
    ).encode()
    artifacts["timings.csv"] = ("\n".join(timing_lines) + "\n").encode()
    artifacts["original.pgm"] = write_pgm(image)
    artifacts["run-config.json"] = cfg.to_json().encode()
    return ExperimentResult(config=cfg, rows=reports, artifacts=artifacts)


# -- system identification ---------------------------------------------------------


def _sysid_cell(task) -> tuple:
    n, m, k, trial, master_seed, dist_kind, solver = task
    probe = make_probe(
        n,
        k,
        DistributionSpec(dist_kind, k),
        cell_seed(master_seed, "sysid", "sym_toeplitz", k, trial, PART_OPERATOR),
    )
    x = draw_rademacher_spikes(
        n, m, cell_seed(master_seed, "sysid", "sym_toeplitz", k, trial, PART_SIGNAL)
    )
    y = convolve_and_measure(probe, x)
    t0 = time.perf_counter()
    res = identify_system(probe, y, solver)
    seconds = time.perf_counter() - t0
    truth = x.to_dense()
    rel = float(np.linalg.norm(res.x_hat - truth) / np.linalg.norm(truth))
    return (
        "sym_toeplitz",
        k,
        trial,
        judge_success(x, res.x_hat, solver.success_rel_tol),
        rel,
        seconds,
    )


def run_sysid(cfg: ExperimentConfig) -> ExperimentResult:
    """Impulse-response identification: symmetric probe, convolution
    measurements, basis pursuit."""
    tasks = [
        (cfg.n, cfg.m, k, trial, cfg.master_seed, cfg.dist, cfg.solver)
        for k in cfg.k_grid
        for trial in range(cfg.trials)
    ]
    cells = _run_cells(tasks, _sysid_cell, cfg.workers)
    rows = _aggregate(cells, cfg.trials)
    artifacts = {
        "results.csv": _rows_csv(rows, "sysid").encode(),
        "results.json": _rows_json(rows, "sysid").encode(),
        "timings.csv": _timings_csv(rows, "sysid").encode(),
        "chart.svg": _rate_chart(rows, "System identification success rate").encode(),
        "run-config.json": cfg.to_json().encode(),
    }
    # exemplar probe/response pair (trial 0) per k, as loadable CSV
    for k in cfg.k_grid:
        probe = make_probe(
            cfg.n,
            k,
            DistributionSpec(cfg.dist, k),
            cell_seed(cfg.master_seed, "sysid", "sym_toeplitz", k, 0, PART_OPERATOR),
        )
        x = draw_rademacher_spikes(
            cfg.n, cfg.m, cell_seed(cfg.master_seed, "sysid", "sym_toeplitz", k, 0, PART_SIGNAL)
        )
        artifacts[f"probe_k{k}.csv"] = probe_to_csv(probe).encode()
        artifacts[f"response_k{k}.csv"] = vector_to_csv(
            convolve_and_measure(probe, x)
        ).encode()
    return ExperimentResult(config=cfg, rows=rows, artifacts=artifacts)


# -- piecewise-constant recovery ------------------------------------------------------


def _pwc_cell(task) -> tuple:
    n, m, kind, k, trial, master_seed, dist_kind, solver = task
    theta = draw_rademacher_spikes(
        n, m, cell_seed(master_seed, "pwc", kind, k, trial, PART_SIGNAL)
    )
    x = np.cumsum(theta.to_dense())
    op_al = build_operator(
        kind,
        k,
        n,
        dist=DistributionSpec(dist_kind, k),
        seed=cell_seed(master_seed, "pwc", kind, k, trial, PART_OPERATOR),
        compose_D=True,
    )
    y = op_al.apply(x)
    t0 = time.perf_counter()
    res, x_hat = recover_pwc(op_al, y, solver)
    seconds = time.perf_counter() - t0
    x_norm = float(np.linalg.norm(x))
    rel = float(np.linalg.norm(x_hat - x)) / x_norm if x_norm > 0 else float(
        np.linalg.norm(x_hat)
    )
    return (kind, k, trial, rel <= solver.success_rel_tol, rel, seconds)


def run_pwc(cfg: ExperimentConfig) -> ExperimentResult:
    """Piecewise-constant recovery through the differencing composition; the
    solver runs against the underlying symmetric Toeplitz operator."""
    kinds = [k for k in cfg.matrix_kinds if k in SYMMETRIC_KINDS] or ["sym_toeplitz"]
    tasks = [
        (cfg.n, cfg.m, kind, k, trial, cfg.master_seed, cfg.dist, cfg.solver)
        for kind in kinds
        for k in cfg.k_grid
        for trial in range(cfg.trials)
    ]
    cells = _run_cells(tasks, _pwc_cell, cfg.workers)
    rows = _aggregate(cells, cfg.trials)
    artifacts = {
        "results.csv": _rows_csv(rows, "pwc").encode(),
        "results.json": _rows_json(rows, "pwc").encode(),
        "timings.csv": _timings_csv(rows, "pwc").encode(),
        "chart.svg": _rate_chart(rows, "Piecewise-constant recovery success rate").encode(),
        "run-config.json": cfg.to_json().encode(),
    }
    return ExperimentResult(config=cfg, rows=rows, artifacts=artifacts)


# -- RIP audit ------------------------------------------------------------------------


def run_rip_audit(cfg: ExperimentConfig) -> ExperimentResult:
    """End-to-end certificate chain on an enumerable instance: RIP constant,
    dependency-graph degree bound, equitable partition, block decomposition
    residuals, and the theoretical bound evaluations."""
    n, m, k = cfg.n, cfg.m, cfg.k_grid[0]
    s = 3 * m
    q = 3 * m * (6 * m - 1) + 1
    kinds_report = []
    for kind in cfg.matrix_kinds:
        op = build_operator(
            kind,
            k,
            n,
            dist=DistributionSpec(cfg.dist, k),
            seed=cell_seed(cfg.master_seed, "rip_audit", kind, k, 0, PART_OPERATOR),
        )
        entry: dict = {"matrix_kind": kind, "n": n, "m": m, "k": k, "s": s}
        if cfg.monte_carlo is not None:
            rip = rip_monte_carlo(
                op,
                s,
                cfg.monte_carlo,
                cell_seed(cfg.master_seed, "rip_audit", kind, k, 0, PART_SUBSET),
            )
        else:
            try:
                rip = rip_exact(op, s)
            except BudgetExceededError as exc:
                raise BudgetExceededError(
                    f"{exc}; rerun with --monte-carlo <trials>"
                ) from exc
        entry["rip"] = json.loads(rip.to_json())
        if kind in SYMMETRIC_KINDS:
            T = rip.witness_subset
            graph = dependency_graph(op, T)
            part = equitable_coloring(graph, q)
            decomp = verify_decomposition(
                op,
                T,
                part,
                probes=50,
                seed=cell_seed(cfg.master_seed, "rip_audit", kind, k, 0, PART_PROBES),
            )
            entry["dependency_graph"] = json.loads(graph.to_json())
            entry["equitable_partition"] = json.loads(part.to_json())
            entry["decomposition"] = {
                "passed": decomp.passed,
                "max_rel_error": decomp.max_rel_error,
                "probes": decomp.probes,
            }
        entry["theory"] = json.loads(
            theory_bounds(make_theory_params(n, m, k, cfg.delta3m)).to_json()
        )
        kinds_report.append(entry)
    report = {"experiment": "rip_audit", "q": q, "kinds": kinds_report}
    artifacts = {
        "results.json": (json.dumps(report, sort_keys=True, indent=2) + "\n").encode(),
        "run-config.json": cfg.to_json().encode(),
    }
    return ExperimentResult(config=cfg, rows=kinds_report, artifacts=artifacts)


RUNNERS = {
    "sweep": run_sweep,
    "image": run_image,
    "sysid": run_sysid,
    "pwc": run_pwc,
    "rip_audit": run_rip_audit,
}
