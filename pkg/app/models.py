from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Literal, Optional
from enum import Enum

from app.engines.tree_model import CHUNK_SIZE, n_max, node_size


class TreeMeta(BaseModel):
    """Shape of a flattened tree; checked against the sizing formulas on construction"""

    model_config = ConfigDict(frozen=True)

    order_m: int = Field(ge=3)
    k_max: int = Field(ge=1)
    height_h: int = Field(ge=1)
    node_count: int = Field(ge=0)
    entry_count: int = Field(ge=0)
    root_offset: int = Field(default=0, ge=0)
    node_size: int

    @classmethod
    def for_order(cls, order_m: int, height_h: int, node_count: int, entry_count: int,
                  root_offset: int = 0) -> "TreeMeta":
        return cls(
            order_m=order_m,
            k_max=order_m - 1,
            height_h=height_h,
            node_count=node_count,
            entry_count=entry_count,
            root_offset=root_offset,
            node_size=node_size(order_m),
        )

    @model_validator(mode="after")
    def check_shape(self):
        if self.k_max != self.order_m - 1:
            raise ValueError(f"k_max must be order_m - 1, got {self.k_max}")
        if self.node_size != node_size(self.order_m):
            raise ValueError(f"node_size must be 40 * order_m, got {self.node_size}")
        if self.node_size % CHUNK_SIZE:
            raise ValueError("node_size must be a whole number of 32-byte chunks")
        if self.root_offset % self.node_size:
            raise ValueError("root_offset must be node-aligned")
        if self.node_count > n_max(self.order_m, self.height_h):
            raise ValueError(
                f"{self.node_count} nodes exceed the capacity of a height-{self.height_h} tree"
            )
        return self

    @property
    def nodes_bytes(self) -> int:
        return self.node_count * self.node_size


class SearchStats(BaseModel):
    """Node-fetch accounting for one search run"""

    node_loads_per_level: List[int]
    total_node_loads: int = 0
    bytes_fetched: int = 0
    chunks_fetched: int = 0
    slot_comparisons: int = 0
    fifo_high_water: int = 0
    batch_size: int = 0
    key_buffer_loads: int = 0

    @classmethod
    def empty(cls, height_h: int) -> "SearchStats":
        return cls(node_loads_per_level=[0] * height_h)

    @property
    def loads_per_key(self) -> float:
        return self.total_node_loads / self.batch_size if self.batch_size else 0.0

    @classmethod
    def aggregate(cls, parts: List["SearchStats"]) -> "SearchStats":
        """Sum instances level-wise; each instance owns a FIFO, so high-water marks add up"""
        if not parts:
            raise ValueError("nothing to aggregate")
        levels = len(parts[0].node_loads_per_level)
        return cls(
            node_loads_per_level=[
                sum(p.node_loads_per_level[d] for p in parts) for d in range(levels)
            ],
            total_node_loads=sum(p.total_node_loads for p in parts),
            bytes_fetched=sum(p.bytes_fetched for p in parts),
            chunks_fetched=sum(p.chunks_fetched for p in parts),
            slot_comparisons=sum(p.slot_comparisons for p in parts),
            fifo_high_water=sum(p.fifo_high_water for p in parts),
            batch_size=sum(p.batch_size for p in parts),
            key_buffer_loads=sum(p.key_buffer_loads for p in parts),
        )


class GenSpec(BaseModel):
    """Seeded description of a generated tree or batch"""

    entry_count: int = Field(default=1, ge=1)
    order_m: int = 16
    seed: int = Field(default=7, ge=0, lt=2 ** 64)
    hit_ratio: float = Field(default=0.5, ge=0.0, le=1.0)
    wide_keys: bool = False


class SearchMode(str, Enum):
    BATCHED = "batched"
    BASELINE = "baseline"
    PARTITIONED = "partitioned"
    THREADED = "threaded"


class BenchConfig(BaseModel):
    mode: SearchMode = SearchMode.BATCHED
    repeats: int = Field(default=10, ge=1)
    batch_size: int = Field(default=1000, ge=1)
    instances_p: int = Field(default=1, ge=1)


class RobustSummary(BaseModel):
    n: int
    iqm: float
    iqr: float
    q1: float
    q3: float
    unit: str = ""
    samples: List[float] = []


class BenchReport(BaseModel):
    config: BenchConfig
    height_h: int
    entry_count: int
    order_m: int
    metrics: Dict[str, RobustSummary]


class BenchRow(BaseModel):
    """One configuration in a sweep"""

    mode: SearchMode
    entry_count: int
    order_m: int
    height_h: int
    batch_size: int
    instances_p: int
    repeats: int
    total_loads_iqm: float
    total_loads_iqr: float
    loads_per_key: float
    wall_time_iqm_s: float
    wall_time_iqr_s: float


class VerifyReport(BaseModel):
    batch_size: int
    mismatches: int
    first_mismatches: List[int] = []
    batched_loads: int
    baseline_loads: int
    load_ratio: float
    passed: bool


class TreeSummary(BaseModel):
    meta: TreeMeta
    file_size: Optional[int] = None
    nodes_per_level: List[int] = []


# API bodies

class SearchRequest(BaseModel):
    keys: List[str]
    instances: int = Field(default=1, ge=1)


class SearchResponse(BaseModel):
    results: List[int]
    found: List[bool]
    stats: SearchStats


class VerifyRequest(BaseModel):
    keys: List[str]


class HealthResponse(BaseModel):
    status: Literal["healthy", "degraded"]
    tree_loaded: bool
    max_batch: int
