"""Shared test oracles, kept independent of the library's fast paths."""

import numpy as np

from qospinn.unary import encode_angles


def random_unit(rng, n):
    h = rng.normal(size=n)
    return h / np.linalg.norm(h)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


class AncillaCircuit:
    """Explicit amplitude evolution of the tomography circuit, n <= 8 only.

    State space: (ancilla bit) x (vacuum |0...0> plus the n unary states),
    stored as a (2, n+1) real amplitude array. RBS rotations act inside the
    unary block and leave the vacuum alone, which is exactly their action on
    the full Hilbert space restricted to Hamming weight <= 1.
    """

    def __init__(self, n):
        if n > 8:
            raise ValueError("explicit circuit oracle limited to n <= 8")
        self.n = n
        self.amp = np.zeros((2, n + 1))
        self.amp[0, 0] = 1.0

    def hadamard_anc(self):
        a0, a1 = self.amp[0].copy(), self.amp[1].copy()
        self.amp[0] = (a0 + a1) / np.sqrt(2.0)
        self.amp[1] = (a0 - a1) / np.sqrt(2.0)

    def x_anc(self):
        self.amp = self.amp[::-1].copy()

    def cnot_anc_first_wire(self):
        # X on wire 0 swaps vacuum <-> e_1; any weight on e_j (j > 1) would
        # leave the simulated subspace, so the oracle insists it is absent.
        if np.max(np.abs(self.amp[1, 2:])) > 1e-12:
            raise RuntimeError("CNOT would leave the Hamming-weight <= 1 subspace")
        self.amp[1, 0], self.amp[1, 1] = self.amp[1, 1], self.amp[1, 0]

    def _rotate(self, branch, i, j, theta, transpose):
        c, s = np.cos(theta), np.sin(theta)
        lo, hi = self.amp[branch, i + 1], self.amp[branch, j + 1]
        if transpose:
            self.amp[branch, i + 1] = c * lo - s * hi
            self.amp[branch, j + 1] = s * lo + c * hi
        else:
            self.amp[branch, i + 1] = c * lo + s * hi
            self.amp[branch, j + 1] = -s * lo + c * hi

    def controlled_load(self, vec):
        """Loading cascade for ``vec`` on the ancilla=1 branch."""
        gammas = encode_angles(vec)
        for t, g in enumerate(gammas):
            self._rotate(1, t, t + 1, g, transpose=True)

    def pyramid(self, gates, thetas):
        for (i, j), th in zip(gates, thetas):
            self._rotate(0, i, j, th, transpose=False)
            self._rotate(1, i, j, th, transpose=False)

    def run_tomography(self, gates, thetas, h):
        """Full interference sequence; returns (p0, p1) over the unary index."""
        n = self.n
        self.hadamard_anc()
        self.cnot_anc_first_wire()
        self.controlled_load(h)
        self.pyramid(gates, thetas)
        self.x_anc()
        self.cnot_anc_first_wire()
        self.controlled_load(np.full(n, 1.0 / np.sqrt(n)))
        self.hadamard_anc()
        p0 = self.amp[0, 1:] ** 2
        p1 = self.amp[1, 1:] ** 2
        return p0, p1
