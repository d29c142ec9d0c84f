"""
GradientSet: a named collection of gradient tensors.

Names follow the parameter namespace of RelevanceModel ("ars.W_q",
"ars.W_c", "ars.w_att", "loss.log_tau", "encoder.table") and, inside the
batch objective, intermediate inputs ("emb:<text key>"). Iteration order is
sorted by name so every reduction (norms, merges) is order-fixed.
"""

from typing import Iterator, Mapping, Optional

import numpy as np


class GradientSet:
    def __init__(self, grads: Optional[Mapping[str, np.ndarray]] = None):
        self._grads: dict[str, np.ndarray] = {}
        for name, grad in (grads or {}).items():
            self.add(name, grad)

    def add(self, name: str, grad) -> None:
        """Accumulates ``grad`` into ``name`` (copying on first insert)."""
        grad = np.asarray(grad, dtype=np.float64)
        if name in self._grads:
            self._grads[name] = self._grads[name] + grad
        else:
            self._grads[name] = grad.copy()

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet({name: factor * grad for name, grad in self.items()})

    def merged(self, other: "GradientSet", weight: float = 1.0) -> "GradientSet":
        """Returns self + weight * other over the union of names."""
        out = GradientSet(dict(self.items()))
        for name, grad in other.items():
            out.add(name, weight * grad)
        return out

    def global_norm(self) -> float:
        """l2 norm of the concatenation of all tensors."""
        total = 0.0
        for _, grad in self.items():
            total += float(np.sum(grad * grad))
        return float(np.sqrt(total))

    def all_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(grad))) for _, grad in self.items())

    def names(self) -> list[str]:
        return sorted(self._grads)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, self._grads[name]

    def get(self, name: str, default=None):
        return self._grads.get(name, default)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __contains__(self, name: str) -> bool:
        return name in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{n}{tuple(g.shape)}" for n, g in self.items())
        return f"GradientSet({shapes})"
