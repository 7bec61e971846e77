"""Exact and finite-shot simulation of Hamming-weight-1 (unary) RBS circuits.

A state on ``n`` wires is represented by the real amplitudes of the unary
basis states ``e_1 .. e_n``. Every operation here preserves the 2-norm. The
two-wire RBS rotation follows the convention

    (a_lo, a_hi) <- (cos(t)*a_lo + sin(t)*a_hi, -sin(t)*a_lo + cos(t)*a_hi)

while the *loading* cascade uses the transposed rotation so that positive
angles build the usual cos/sin product profile (``load_state([pi/2]) ==
[0, +1]``).
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import as_float_array, check_orthogonal, check_unit_vector

ENCODE_RESIDUAL_FLOOR = 1e-12


@dataclass
class GateSpec:
    """A single RBS rotation between two wires, ``wire_lo < wire_hi``."""

    wire_lo: int
    wire_hi: int
    theta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.wire_lo < self.wire_hi:
            raise ValueError(f"invalid wire pair ({self.wire_lo}, {self.wire_hi})")


@dataclass
class UnaryState:
    """Amplitudes over the unary basis of an ``n``-wire register."""

    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = as_float_array(self.amplitudes, "amplitudes", ndim=1)

    @property
    def n_wires(self):
        return self.amplitudes.shape[0]

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class TomographyResult:
    """Recovered amplitudes plus the per-index ancilla outcome probabilities."""

    recovered: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    shots_used: object = "exact"  # int shot count or the string "exact"
    sign: np.ndarray = field(default=None)


def encode_angles(h):
    """Rotation angles that load the unit vector ``h`` onto the unary basis.

    The first ``n-2`` angles are ``arccos(h_i / prod_{j<i} sin(g_j))``; the
    final angle is resolved with atan2 so that a negative trailing amplitude
    is representable. Once the running residual norm falls below
    ``ENCODE_RESIDUAL_FLOOR`` all remaining angles are zero (the already
    placed amplitudes are exact and the quotient would be 0/0).
    """
    h = check_unit_vector(h)
    n = h.shape[0]
    if n < 2:
        return np.zeros(0)
    gammas = np.zeros(n - 1)
    residual = 1.0  # prod_{j<i} sin(g_j), always >= 0 for the arccos angles
    for i in range(n - 2):
        if residual < ENCODE_RESIDUAL_FLOOR:
            return gammas
        gammas[i] = np.arccos(np.clip(h[i] / residual, -1.0, 1.0))
        residual *= np.sin(gammas[i])
    if residual >= ENCODE_RESIDUAL_FLOOR:
        gammas[n - 2] = np.arctan2(h[n - 1] / residual, h[n - 2] / residual)
    return gammas


def load_state(gammas):
    """Run the loading cascade: start at ``e_1``, rotate down the wire chain.

    With angles from :func:`encode_angles` the resulting amplitudes are the
    encoded vector. Gate ``t`` acts on wires ``(t, t+1)`` with the transposed
    RBS convention, producing ``a_t = cos(g_t) * prod_{j<t} sin(g_j)``.
    """
    gammas = as_float_array(gammas, "gammas", ndim=1)
    n = gammas.shape[0] + 1
    amps = np.zeros(n)
    amps[0] = 1.0
    for t, g in enumerate(gammas):
        c, s = np.cos(g), np.sin(g)
        lo, hi = amps[t], amps[t + 1]
        amps[t] = c * lo - s * hi
        amps[t + 1] = s * lo + c * hi
    return UnaryState(amps)


def apply_rbs(state, gate):
    """Apply one RBS rotation; all amplitudes off the touched pair are kept."""
    amps = state.amplitudes.copy()
    n = amps.shape[0]
    if gate.wire_hi >= n:
        raise ValueError(f"gate wires ({gate.wire_lo}, {gate.wire_hi}) out of range for {n} wires")
    c, s = np.cos(gate.theta), np.sin(gate.theta)
    lo, hi = amps[gate.wire_lo], amps[gate.wire_hi]
    amps[gate.wire_lo] = c * lo + s * hi
    amps[gate.wire_hi] = -s * lo + c * hi
    return UnaryState(amps)


def pyramid_gate_sequence(n):
    """Nearest-neighbor pyramid wire pairs for ``n`` wires, n(n-1)/2 in total.

    Wire ``j`` is brought in by the descending run ``(j-1,j), ..., (0,1)``;
    for n=4 this yields (0,1),(1,2),(0,1),(2,3),(1,2),(0,1).
    """
    if n < 2:
        raise ValueError(f"pyramid needs at least 2 wires, got {n}")
    pairs = []
    for j in range(1, n):
        for i in range(j, 0, -1):
            pairs.append((i - 1, i))
    return pairs


def gate_slots(pairs):
    """Group an ordered gate list into slots of wire-disjoint gates.

    Gates in one slot commute (no shared wires), so applying slots in order
    reproduces the sequential product exactly while allowing vectorized
    application. Returns ``[(gate_idx, lo, hi), ...]`` with ndarray fields.
    """
    level = {}
    buckets = []
    for t, (i, j) in enumerate(pairs):
        s = max(level.get(i, 0), level.get(j, 0))
        if s == len(buckets):
            buckets.append([])
        buckets[s].append(t)
        level[i] = level[j] = s + 1
    slots = []
    for b in buckets:
        idx = np.array(b, dtype=np.intp)
        lo = np.array([pairs[t][0] for t in b], dtype=np.intp)
        hi = np.array([pairs[t][1] for t in b], dtype=np.intp)
        slots.append((idx, lo, hi))
    return slots


def apply_gate_slots(states, thetas, slots, tape=None):
    """Apply a scheduled RBS cascade in place to a ``(B, n)`` amplitude batch.

    When ``tape`` is a list, the pre-rotation column pairs of every slot are
    appended to it (needed by :func:`backward_gate_slots`).
    """
    for idx, lo, hi in slots:
        c = np.cos(thetas[idx])
        s = np.sin(thetas[idx])
        a = states[:, lo]  # fancy indexing copies
        b = states[:, hi]
        if tape is not None:
            tape.append((a, b))
        states[:, lo] = c * a + s * b
        states[:, hi] = c * b - s * a
    return states


def backward_gate_slots(adjoint, thetas, slots, tape, theta_grads):
    """Reverse sweep of :func:`apply_gate_slots`.

    Rotates the output adjoint back through each slot (transpose rotation)
    and accumulates d(loss)/d(theta_t) from the cached pre-rotation pairs:
    O(1) work per gate per batch row. ``adjoint`` is modified in place and
    returned as the adjoint of the cascade input.
    """
    for (idx, lo, hi), (a, b) in zip(reversed(slots), reversed(tape)):
        c = np.cos(thetas[idx])
        s = np.sin(thetas[idx])
        da = adjoint[:, lo]
        db = adjoint[:, hi]
        # gate indices within a slot are distinct, so plain fancy-index add is safe
        theta_grads[idx] += np.sum(da * (c * b - s * a) - db * (c * a + s * b), axis=0)
        adjoint[:, lo] = c * da - s * db
        adjoint[:, hi] = s * da + c * db
    return adjoint


def _recover(p0, p1, n):
    """Amplitude recovery from ancilla-interference probabilities.

    The sign of component i is positive iff p(0,e_i) > p(1,e_i). The
    positive branch reads the amplitude from p0; the negative branch is the
    mirrored read from p1, which coincides with the p0 form on its shared
    domain and stays exact on (-1/sqrt(n), 0).
    """
    inv = 1.0 / np.sqrt(n)
    sign = np.where(p0 > p1, 1.0, -1.0)
    rec = np.where(sign > 0, 2.0 * np.sqrt(p0) - inv, -(2.0 * np.sqrt(p1) - inv))
    return rec, sign


def tomography_from_amplitudes(y, shots=None, rng=None):
    """Tomography statistics and recovery for a known unary state ``y``.

    The joint outcome distribution over (ancilla bit, unary index) is

        p(0, e_i) = (y_i + 1/sqrt(n))^2 / 4
        p(1, e_i) = (y_i - 1/sqrt(n))^2 / 4

    which sums to 1 for unit y. ``shots=None`` evaluates the probabilities
    exactly; an integer draws that many samples from the joint distribution
    (requires a seeded ``rng``) and applies the same recovery to the
    empirical frequencies.
    """
    y = as_float_array(y, "y", ndim=1)
    n = y.shape[0]
    inv = 1.0 / np.sqrt(n)
    p0 = (y + inv) ** 2 / 4.0
    p1 = (y - inv) ** 2 / 4.0
    if shots is None:
        rec, sign = _recover(p0, p1, n)
        return TomographyResult(rec, p0, p1, "exact", sign)
    shots = int(shots)
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    if rng is None:
        raise ValueError("sampled tomography requires a seeded rng")
    probs = np.concatenate([p0, p1])
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    counts = rng.multinomial(shots, probs)
    f0 = counts[:n] / shots
    f1 = counts[n:] / shots
    rec, sign = _recover(f0, f1, n)
    return TomographyResult(rec, f0, f1, shots, sign)


def tomography(W, h, shots=None, rng=None):
    """Recover ``W @ h`` from the ancilla-interference measurement statistics.

    Validates that W is orthogonal and h unit, forms the state amplitudes
    W @ h, and delegates to :func:`tomography_from_amplitudes`. Exact mode
    reproduces W @ h to machine precision.
    """
    W = check_orthogonal(W)
    h = check_unit_vector(h)
    n = h.shape[0]
    if W.shape[0] != n:
        raise ValueError(f"W is {W.shape} but h has length {n}")
    return tomography_from_amplitudes(W @ h, shots=shots, rng=rng)
