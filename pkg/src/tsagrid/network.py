"""Small modified-nodal-analysis solver for steady-state phasor networks."""

from __future__ import annotations

import numpy as np


class SingularNetworkError(RuntimeError):
    """Raised when the nodal system has no unique solution."""


class PhasorNetwork:
    """Accumulates branches and solves for node voltages.

    Nodes are referred to by hashable names; ``None`` is ground. Zero
    impedance branches and ideal sources become extra current unknowns, so
    nothing is regularized.
    """

    def __init__(self):
        self._nodes: dict = {}
        self._stamps: list[tuple[int, int, complex]] = []
        self._vsources: list[tuple[int, int, complex]] = []
        self._injections: list[tuple[int, complex]] = []

    def node(self, name) -> int:
        if name is None:
            return -1
        return self._nodes.setdefault(name, len(self._nodes))

    def add_admittance(self, a, b, y: complex):
        self.add_two_port(a, b, [[y, -y], [-y, y]])

    def add_impedance(self, a, b, z: complex):
        if z == 0:
            self._vsources.append((self.node(a), self.node(b), 0j))
        else:
            self.add_admittance(a, b, 1.0 / z)

    def add_two_port(self, a, b, y_matrix):
        """Stamp a 2x2 nodal admittance matrix between nodes ``a`` and ``b``."""
        idx = (self.node(a), self.node(b))
        for r in range(2):
            for c in range(2):
                self._stamps.append((idx[r], idx[c], complex(y_matrix[r][c])))

    def add_source(self, node, emf: complex, z: complex = 0j):
        """Voltage source ``emf`` (to ground) behind series impedance ``z``."""
        if z == 0:
            self._vsources.append((self.node(node), -1, complex(emf)))
        else:
            inner = ("_emf", node)
            self._vsources.append((self.node(inner), -1, complex(emf)))
            self.add_admittance(inner, node, 1.0 / z)

    def add_injection(self, node, current: complex):
        """Current source pushing ``current`` into ``node`` from ground."""
        self._injections.append((self.node(node), complex(current)))

    def solve(self, cond_limit: float = 1e13) -> dict:
        n, m = len(self._nodes), len(self._vsources)
        A = np.zeros((n + m, n + m), dtype=complex)
        rhs = np.zeros(n + m, dtype=complex)
        for i, j, y in self._stamps:
            if i >= 0 and j >= 0:
                A[i, j] += y
        for i, cur in self._injections:
            if i >= 0:
                rhs[i] += cur
        for k, (i, j, v) in enumerate(self._vsources):
            row = n + k
            for node, sign in ((i, 1), (j, -1)):
                if node >= 0:
                    A[node, row] += sign
                    A[row, node] += sign
            rhs[row] = v
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularNetworkError(f"nodal matrix is singular (condition number {cond:.3g})")
        x = np.linalg.solve(A, rhs)
        return {name: x[idx] for name, idx in self._nodes.items()}
