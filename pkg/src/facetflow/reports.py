from dataclasses import asdict, dataclass, field
from typing import List, Optional


@dataclass
class SolveReport:
    """Outcome of one sub-solve (u-minimisation, v conjugate gradient or Picard loop)."""

    stage: str
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    converged: bool = False
    energy_final: Optional[float] = None
    energy_history: List[float] = field(default_factory=list)
    fallback_steps: int = 0
    hessian_checks: List[bool] = field(default_factory=list)
    message: str = ""

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self):
        return asdict(self)

    def summary(self):
        """Compact form used in run summaries (histories dropped)."""
        return {
            "stage": self.stage,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "message": self.message,
        }
