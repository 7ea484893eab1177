"""Pydantic request/response models for the HTTP service.

Wire conventions: index sets over matrix rows/columns (theta, T, witnesses,
graph vertices, partition classes, signal supports) are 1-based on the wire
and 0-based inside the library.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..operators import MeasurementOperator, build_operator
from ..randgen import DistributionSpec, SeedSpec
from ..recovery import SolverConfig
from ..signals import SparseSignal


class DistModel(BaseModel):
    kind: Literal["gaussian", "rademacher", "ternary"]
    k: int = Field(ge=1)

    def to_spec(self) -> DistributionSpec:
        return DistributionSpec(self.kind, self.k)


class SeedModel(BaseModel):
    master_seed: int = Field(default=0, ge=0)
    stream_id: int = Field(default=0, ge=0)

    def to_spec(self) -> SeedSpec:
        return SeedSpec(self.master_seed, self.stream_id)


class OperatorModel(BaseModel):
    """Operator descriptor: explicit generator or (dist, seed) provenance."""

    kind: Literal["iid_dense", "toeplitz", "sym_toeplitz", "left_sym_toeplitz"]
    k: int = Field(ge=1)
    n: int = Field(ge=1)
    generator: list[float] | None = None
    dist: DistModel | None = None
    seed: SeedModel | None = None
    theta: list[int] | None = None
    compose_D: bool = False

    def to_operator(self) -> MeasurementOperator:
        theta = None if self.theta is None else [t - 1 for t in self.theta]
        if self.generator is not None:
            return build_operator(
                self.kind, self.k, self.n, generator=self.generator,
                theta=theta, compose_D=self.compose_D,
            )
        if self.dist is None or self.seed is None:
            raise ValueError("descriptor needs a generator or a (dist, seed) pair")
        return build_operator(
            self.kind, self.k, self.n,
            dist=self.dist.to_spec(), seed=self.seed.to_spec(),
            theta=theta, compose_D=self.compose_D,
        )

    @classmethod
    def from_operator(cls, op: MeasurementOperator, explicit: bool = False) -> "OperatorModel":
        theta = None if op.theta is None else [int(t) + 1 for t in op.theta]
        fields: dict = {
            "kind": op.kind, "k": op.k, "n": op.n,
            "theta": theta, "compose_D": op.compose_D,
        }
        if op.dist is not None and op.seed is not None and not explicit:
            fields["dist"] = DistModel(kind=op.dist.kind, k=op.dist.k)
            fields["seed"] = SeedModel(
                master_seed=op.seed.master_seed, stream_id=op.seed.stream_id
            )
        else:
            fields["generator"] = [float(v) for v in op.generator]
        return cls(**fields)


class SolverModel(BaseModel):
    max_iters: int = 20000
    feas_tol: float = 1e-8
    change_tol: float = 1e-10
    tau: float | None = None
    sigma: float | None = None
    step_scale: float = 0.99
    success_rel_tol: float = 1e-3
    check_every: int = 25

    def to_config(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class SparseSignalModel(BaseModel):
    n: int = Field(ge=1)
    support: list[int]
    values: list[float]

    def to_signal(self) -> SparseSignal:
        return SparseSignal(
            n=self.n, support=[s - 1 for s in self.support], values=self.values
        )

    @classmethod
    def from_signal(cls, sig: SparseSignal) -> "SparseSignalModel":
        return cls(
            n=sig.n,
            support=[int(s) + 1 for s in sig.support],
            values=[float(v) for v in sig.values],
        )


# -- randgen ------------------------------------------------------------------


class SequenceRequest(BaseModel):
    dist: DistModel
    n: int = Field(ge=1)
    seed: SeedModel = SeedModel()


class SequenceResponse(BaseModel):
    values: list[float]


class SpikesRequest(BaseModel):
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    seed: SeedModel = SeedModel()


# -- operators ------------------------------------------------------------------


class BuildResponse(BaseModel):
    operator: OperatorModel
    draws_consumed: int | None


class ApplyRequest(BaseModel):
    operator: OperatorModel
    x: list[float]


class ApplyResponse(BaseModel):
    y: list[float]


class AdjointRequest(BaseModel):
    operator: OperatorModel
    y: list[float]


class AdjointResponse(BaseModel):
    x: list[float]


class DenseResponse(BaseModel):
    csv: str


class ColumnNormRequest(BaseModel):
    operator: OperatorModel
    dist: DistModel | None = None
    trials: int = Field(default=2000, ge=1)
    seed: SeedModel | None = None


class ColumnNormResponse(BaseModel):
    trials: int
    all_pass: bool
    max_abs_z: float
    mean_sq: list[float]


# -- riplab ----------------------------------------------------------------------


class RipExactRequest(BaseModel):
    operator: OperatorModel
    s: int = Field(ge=1)
    budget: int = 10**7
    collect_extremes: bool = False


class RipMonteCarloRequest(BaseModel):
    operator: OperatorModel
    s: int = Field(ge=1)
    trials: int = Field(ge=1)
    seed: SeedModel = SeedModel()


class RipReportModel(BaseModel):
    s: int
    delta: float
    mode: str
    witness_subset: list[int]
    within_one_third: bool
    trials: int | None = None
    per_subset_extremes: list[dict] | None = None


class GraphRequest(BaseModel):
    operator: OperatorModel
    T: list[int]


class GraphResponse(BaseModel):
    k: int
    T: list[int]
    edges: list[list[int]]
    max_degree: int
    degree_bound: int
    within_bound: bool


class ColoringRequest(BaseModel):
    operator: OperatorModel
    T: list[int]
    q: int | None = None


class ColoringResponse(BaseModel):
    k: int
    q: int
    classes: list[list[int]]
    sizes: list[int]
    size_floor: int
    size_ceil: int
    independence_pairs_checked: int


class DecompositionRequest(BaseModel):
    operator: OperatorModel
    T: list[int]
    classes: list[list[int]]
    probes: int = Field(default=50, ge=1)
    seed: SeedModel = SeedModel()
    rtol: float = 1e-10


class DecompositionResponse(BaseModel):
    passed: bool
    max_rel_error: float
    probes: int


class TheoryRequest(BaseModel):
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    k: int = Field(ge=1)
    delta3m: float = 0.3
    c2: float | None = None
    c1: float | None = None


# -- recovery ----------------------------------------------------------------------


class BasisPursuitRequest(BaseModel):
    operator: OperatorModel
    y: list[float]
    solver: SolverModel = SolverModel()


class RecoveryResponse(BaseModel):
    x_hat: list[float]
    iters: int
    residual: float
    l1_value: float
    converged: bool


class OmpRequest(BaseModel):
    operator: OperatorModel
    y: list[float]
    m_max: int = Field(ge=1)
    residual_tol: float = 1e-10


class JudgeRequest(BaseModel):
    x_true: SparseSignalModel
    x_hat: list[float]
    success_rel_tol: float = 1e-3


class JudgeResponse(BaseModel):
    success: bool
    relative_error: float


# -- pipelines ----------------------------------------------------------------------


class ProbeRequest(BaseModel):
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    dist: DistModel
    seed: SeedModel = SeedModel()


class ProbeResponse(BaseModel):
    free: list[float]
    full: list[float]


class MeasureRequest(BaseModel):
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    dist: DistModel
    seed: SeedModel = SeedModel()
    x: SparseSignalModel


class MeasureResponse(BaseModel):
    y: list[float]


class IdentifyRequest(BaseModel):
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    dist: DistModel
    seed: SeedModel = SeedModel()
    y: list[float]
    solver: SolverModel = SolverModel()


# -- experiments ----------------------------------------------------------------------


class ExperimentRequest(BaseModel):
    config: dict
    image_pgm_base64: str | None = None


class ArtifactModel(BaseModel):
    encoding: Literal["text", "base64"]
    data: str


class ExperimentResponse(BaseModel):
    experiment: str
    rows: list[dict]
    artifacts: dict[str, ArtifactModel]
