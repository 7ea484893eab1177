"""HTTP service exposing the sensing toolkit.

Compute is synchronous and stateless: every request carries the full problem
description (operators travel as JSON descriptors) and the response carries
the complete result, so the service can be scaled or fronted by the CLI's
in-process transport interchangeably.
"""

from __future__ import annotations

import base64
import dataclasses
import json

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..experiments import RUNNERS, ExperimentConfig, run_image
from ..pgm import PgmError, read_pgm
from ..pipelines import convolve_and_measure, identify_system, make_probe
from ..randgen import ParameterError, draw_rademacher_spikes, draw_sequence
from ..recovery import basis_pursuit, judge_success, omp
from ..riplab import (
    BudgetExceededError,
    ColoringError,
    EquitablePartition,
    PartitionError,
    dependency_graph,
    equitable_coloring,
    make_theory_params,
    rip_exact,
    rip_monte_carlo,
    theory_bounds,
    verify_decomposition,
)
from ..operators import column_norm_expectation_check
from . import schemas as s


def create_app() -> FastAPI:
    app = FastAPI(title="toepsense", version=__version__)

    @app.exception_handler(ParameterError)
    async def _param_error(request: Request, exc: ParameterError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(PartitionError)
    async def _partition_error(request: Request, exc: PartitionError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(PgmError)
    async def _pgm_error(request: Request, exc: PgmError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(BudgetExceededError)
    async def _budget_error(request: Request, exc: BudgetExceededError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ColoringError)
    async def _coloring_error(request: Request, exc: ColoringError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    # -- randgen -----------------------------------------------------------

    @app.post("/random/sequence", response_model=s.SequenceResponse)
    def random_sequence(req: s.SequenceRequest):
        values = draw_sequence(req.dist.to_spec(), req.n, req.seed.to_spec())
        return s.SequenceResponse(values=values.tolist())

    @app.post("/random/spikes", response_model=s.SparseSignalModel)
    def random_spikes(req: s.SpikesRequest):
        sig = draw_rademacher_spikes(req.n, req.m, req.seed.to_spec())
        return s.SparseSignalModel.from_signal(sig)

    # -- operators -----------------------------------------------------------

    @app.post("/operators/build", response_model=s.BuildResponse)
    def operators_build(req: s.OperatorModel):
        op = req.to_operator()
        return s.BuildResponse(
            operator=s.OperatorModel.from_operator(op),
            draws_consumed=op.draws_consumed,
        )

    @app.post("/operators/apply", response_model=s.ApplyResponse)
    def operators_apply(req: s.ApplyRequest):
        y = req.operator.to_operator().apply(np.asarray(req.x))
        return s.ApplyResponse(y=y.tolist())

    @app.post("/operators/adjoint", response_model=s.AdjointResponse)
    def operators_adjoint(req: s.AdjointRequest):
        x = req.operator.to_operator().apply_adjoint(np.asarray(req.y))
        return s.AdjointResponse(x=x.tolist())

    @app.post("/operators/dense", response_model=s.DenseResponse)
    def operators_dense(req: s.OperatorModel):
        return s.DenseResponse(csv=req.to_operator().dense_csv())

    @app.post("/operators/column-norm-check", response_model=s.ColumnNormResponse)
    def operators_column_norm(req: s.ColumnNormRequest):
        rep = column_norm_expectation_check(
            req.operator.to_operator(),
            dist=None if req.dist is None else req.dist.to_spec(),
            trials=req.trials,
            seed=None if req.seed is None else req.seed.to_spec(),
        )
        return s.ColumnNormResponse(
            trials=rep.trials,
            all_pass=rep.all_pass,
            max_abs_z=float(np.abs(rep.z).max()),
            mean_sq=rep.mean_sq.tolist(),
        )

    # -- riplab ----------------------------------------------------------------

    def _rip_model(report) -> s.RipReportModel:
        return s.RipReportModel(
            s=report.s,
            delta=report.delta,
            mode=report.mode,
            witness_subset=[i + 1 for i in report.witness_subset],
            within_one_third=report.within_one_third,
            trials=report.trials,
            per_subset_extremes=None
            if report.per_subset_extremes is None
            else [
                {"subset": [i + 1 for i in t], "lambda_min": lo, "lambda_max": hi}
                for (t, lo, hi) in report.per_subset_extremes
            ],
        )

    @app.post("/rip/exact", response_model=s.RipReportModel)
    def rip_exact_endpoint(req: s.RipExactRequest):
        report = rip_exact(
            req.operator.to_operator(), req.s,
            budget=req.budget, collect_extremes=req.collect_extremes,
        )
        return _rip_model(report)

    @app.post("/rip/monte-carlo", response_model=s.RipReportModel)
    def rip_mc_endpoint(req: s.RipMonteCarloRequest):
        report = rip_monte_carlo(
            req.operator.to_operator(), req.s, req.trials, req.seed.to_spec()
        )
        return _rip_model(report)

    @app.post("/rip/dependency-graph", response_model=s.GraphResponse)
    def graph_endpoint(req: s.GraphRequest):
        graph = dependency_graph(req.operator.to_operator(), [t - 1 for t in req.T])
        return s.GraphResponse(
            k=graph.k,
            T=[t + 1 for t in graph.T],
            edges=[[i + 1, j + 1] for i, j in graph.edges],
            max_degree=graph.max_degree,
            degree_bound=graph.degree_bound,
            within_bound=graph.within_bound,
        )

    @app.post("/rip/equitable-coloring", response_model=s.ColoringResponse)
    def coloring_endpoint(req: s.ColoringRequest):
        graph = dependency_graph(req.operator.to_operator(), [t - 1 for t in req.T])
        p = len(req.T)
        q = req.q if req.q is not None else p * (2 * p - 1) + 1
        part = equitable_coloring(graph, q)
        checked = sum(len(c) * (len(c) - 1) // 2 for c in part.classes)
        return s.ColoringResponse(
            k=part.k,
            q=part.q,
            classes=[[v + 1 for v in c] for c in part.classes],
            sizes=part.sizes,
            size_floor=part.lo,
            size_ceil=part.hi,
            independence_pairs_checked=checked,
        )

    @app.post("/rip/verify-decomposition", response_model=s.DecompositionResponse)
    def decomposition_endpoint(req: s.DecompositionRequest):
        op = req.operator.to_operator()
        graph = dependency_graph(op, [t - 1 for t in req.T])
        part = EquitablePartition(
            k=graph.k,
            q=len(req.classes),
            classes=[[v - 1 for v in c] for c in req.classes],
        )
        rep = verify_decomposition(
            op, [t - 1 for t in req.T], part,
            probes=req.probes, seed=req.seed.to_spec(), rtol=req.rtol,
        )
        return s.DecompositionResponse(
            passed=rep.passed, max_rel_error=rep.max_rel_error, probes=rep.probes
        )

    @app.post("/theory/bounds")
    def theory_endpoint(req: s.TheoryRequest):
        params = make_theory_params(req.n, req.m, req.k, req.delta3m, req.c2, req.c1)
        return json.loads(theory_bounds(params).to_json())

    # -- recovery ----------------------------------------------------------------

    @app.post("/recovery/basis-pursuit", response_model=s.RecoveryResponse)
    def bp_endpoint(req: s.BasisPursuitRequest):
        res = basis_pursuit(
            req.operator.to_operator(), np.asarray(req.y), req.solver.to_config()
        )
        return s.RecoveryResponse(
            x_hat=res.x_hat.tolist(),
            iters=res.iters,
            residual=res.residual,
            l1_value=res.l1_value,
            converged=res.converged,
        )

    @app.post("/recovery/omp", response_model=s.RecoveryResponse)
    def omp_endpoint(req: s.OmpRequest):
        res = omp(
            req.operator.to_operator(), np.asarray(req.y), req.m_max, req.residual_tol
        )
        return s.RecoveryResponse(
            x_hat=res.x_hat.tolist(),
            iters=res.iters,
            residual=res.residual,
            l1_value=res.l1_value,
            converged=res.converged,
        )

    @app.post("/recovery/judge", response_model=s.JudgeResponse)
    def judge_endpoint(req: s.JudgeRequest):
        truth = req.x_true.to_signal()
        x_hat = np.asarray(req.x_hat)
        dense = truth.to_dense()
        norm = float(np.linalg.norm(dense))
        err = float(np.linalg.norm(x_hat - dense))
        rel = err if norm == 0.0 else err / norm
        return s.JudgeResponse(
            success=judge_success(truth, x_hat, req.success_rel_tol),
            relative_error=rel,
        )

    # -- pipelines ----------------------------------------------------------------

    @app.post("/pipelines/probe", response_model=s.ProbeResponse)
    def probe_endpoint(req: s.ProbeRequest):
        probe = make_probe(req.n, req.k, req.dist.to_spec(), req.seed.to_spec())
        return s.ProbeResponse(free=probe.free.tolist(), full=probe.full.tolist())

    @app.post("/pipelines/measure", response_model=s.MeasureResponse)
    def measure_endpoint(req: s.MeasureRequest):
        probe = make_probe(req.n, req.k, req.dist.to_spec(), req.seed.to_spec())
        y = convolve_and_measure(probe, req.x.to_signal())
        return s.MeasureResponse(y=y.tolist())

    @app.post("/pipelines/identify", response_model=s.RecoveryResponse)
    def identify_endpoint(req: s.IdentifyRequest):
        probe = make_probe(req.n, req.k, req.dist.to_spec(), req.seed.to_spec())
        res = identify_system(probe, np.asarray(req.y), req.solver.to_config())
        return s.RecoveryResponse(
            x_hat=res.x_hat.tolist(),
            iters=res.iters,
            residual=res.residual,
            l1_value=res.l1_value,
            converged=res.converged,
        )

    # -- experiments ----------------------------------------------------------------

    @app.post("/experiments/run", response_model=s.ExperimentResponse)
    def experiments_run(req: s.ExperimentRequest):
        cfg = ExperimentConfig.from_dict(req.config)
        if cfg.experiment == "image" and req.image_pgm_base64 is not None:
            image = read_pgm(base64.b64decode(req.image_pgm_base64))
            result = run_image(cfg, image)
        else:
            result = RUNNERS[cfg.experiment](cfg)
        artifacts = {}
        for name, blob in result.artifacts.items():
            if name.endswith(".pgm"):
                artifacts[name] = s.ArtifactModel(
                    encoding="base64", data=base64.b64encode(blob).decode()
                )
            else:
                artifacts[name] = s.ArtifactModel(encoding="text", data=blob.decode())
        rows = [
            dataclasses.asdict(r) if dataclasses.is_dataclass(r) else r
            for r in result.rows
        ]
        return s.ExperimentResponse(
            experiment=cfg.experiment, rows=rows, artifacts=artifacts
        )

    return app


app = create_app()
