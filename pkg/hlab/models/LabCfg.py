from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

SEED_VARIABLE = "HESSIANLAB_SEED"


@dataclass
class LabSection:
    """Run-wide settings for the lab."""
    seed: int = 0
    workers: int = 1
    log_level: str = "INFO"

    def __init__(self, dict: Dict):
        self.seed = int(dict.get("seed", 0))
        self.workers = int(dict.get("workers", 1))
        self.log_level = dict.get("log_level") or "INFO"


@dataclass
class OperatorSection:
    """Which operator the operator and ABP harnesses build."""
    id: str = "monge_ampere"
    n: int = 2
    m: int = 1
    l: int = 0
    a: float = 0.0
    samples: int = 2000

    def __init__(self, dict: Dict):
        self.id = dict.get("id") or "monge_ampere"
        self.n = int(dict.get("n", 2))
        self.m = int(dict.get("m", 1))
        self.l = int(dict.get("l", 0))
        self.a = float(dict.get("a", 0.0))
        self.samples = int(dict.get("samples", 2000))


@dataclass
class GridSection:
    """Grid resolution for the grid-based checks."""
    per_axis: int = 9
    points: int = 10_000
    radius: float = 1.0

    def __init__(self, dict: Dict):
        self.per_axis = int(dict.get("per_axis", 9))
        self.points = int(dict.get("points", 10_000))
        self.radius = float(dict.get("radius", 1.0))


@dataclass
class AbpSection:
    """Exponents of the ABP estimate; k and delta default to the operator's."""
    r_exp: Optional[float] = None
    p_exp: Optional[float] = None
    k: Optional[float] = None
    delta: float = 1.0
    M: int = 256
    corollary: bool = False

    def __init__(self, dict: Dict):
        self.r_exp = dict.get("r_exp")
        self.p_exp = dict.get("p_exp")
        self.k = dict.get("k")
        self.delta = float(dict.get("delta", 1.0))
        self.M = int(dict.get("M", 256))
        self.corollary = bool(dict.get("corollary", False))


@dataclass
class OutputSection:
    format: str = "json"
    path: Optional[str] = None

    def __init__(self, dict: Dict):
        self.format = dict.get("format") or "json"
        self.path = dict.get("path")


@dataclass
class LabConfig:
    """Configuration for a hessian-lab run."""
    lab: LabSection
    operator: OperatorSection
    grid: GridSection
    abp: AbpSection
    output: OutputSection

    def __init__(self, dict: Optional[Dict] = None):
        dict = dict or {}
        self.lab = LabSection(dict.get("lab", {}))
        self.operator = OperatorSection(dict.get("operator", {}))
        self.grid = GridSection(dict.get("grid", {}))
        self.abp = AbpSection(dict.get("abp", {}))
        self.output = OutputSection(dict.get("output", {}))

    def apply_environment(self, environ: Dict[str, str]) -> "LabConfig":
        """HESSIANLAB_SEED wins over every other source of the seed."""
        if environ.get(SEED_VARIABLE):
            self.lab.seed = int(environ[SEED_VARIABLE])
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lab": asdict(self.lab),
            "operator": asdict(self.operator),
            "grid": asdict(self.grid),
            "abp": asdict(self.abp),
            "output": asdict(self.output),
        }
