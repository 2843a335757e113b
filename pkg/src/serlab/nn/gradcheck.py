"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    per_block: dict[str, float]
    tol: float

    @property
    def max_error(self) -> float:
        return max(self.per_block.values()) if self.per_block else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    def worst_block(self) -> str:
        return max(self.per_block, key=self.per_block.get)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {status}: max relative error {self.max_error:.3e} "
                f"(tol {self.tol:.1e}, worst block '{self.worst_block()}')")


def finite_difference_check(loss_fn: Callable[[], Tensor],
                            params: dict[str, Tensor],
                            h: float = 1e-5,
                            tol: float = 1e-4) -> GradCheckReport:
    """Compare backpropagated gradients of ``loss_fn`` against central
    differences, elementwise.

    ``loss_fn`` must be a deterministic closure over ``params`` returning a
    scalar Tensor. Relative error per element is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); the report
    carries the max over each parameter block.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None
                       else np.zeros_like(p.data))
                for name, p in params.items()}

    per_block: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().item()
            flat[i] = orig - h
            f_minus = loss_fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic[name].reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
        per_block[name] = worst
    return GradCheckReport(per_block=per_block, tol=tol)
