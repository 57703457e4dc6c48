"""Dense statevector simulation: register layouts, the gate library,
projections, partial trace, and per-qubit amplitude extraction.

Convention: basis-index bit k is global qubit position k (position 0 is the
least significant bit of the basis index). Register qubits occupy positions
in declaration order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 20
EPS_NORM = 1e-12
EPS_PROJ = 1e-12


class SimulationError(Exception):
    pass


class EntangledQubitError(SimulationError):
    """Per-qubit amplitudes are undefined: the reduced state is mixed."""

    def __init__(self, qubit: int, purity: float):
        super().__init__(f"qubit {qubit} is entangled (purity {purity:.6f})")
        self.qubit = qubit
        self.purity = purity


class ZeroProbabilityError(SimulationError):
    def __init__(self, prob: float, what: str = "projection"):
        super().__init__(f"{what} has probability {prob:.3e}")
        self.prob = prob


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered registers mapped onto global qubit positions."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen = set()
        for name, width in self.registers:
            if width <= 0:
                raise SimulationError(f"register width must be positive: "
                                      f"{name}[{width}]")
            if name in seen:
                raise SimulationError(f"duplicate register name '{name}'")
            seen.add(name)
        if self.n_qubits == 0:
            raise SimulationError("empty layout")
        if self.n_qubits > MAX_QUBITS:
            raise SimulationError(f"{self.n_qubits} qubits exceed the dense "
                                  f"statevector limit of {MAX_QUBITS}")

    @property
    def n_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    def width(self, name: str) -> int:
        for reg, w in self.registers:
            if reg == name:
                return w
        raise SimulationError(f"unknown register '{name}'")

    def position(self, name: str, index: int) -> int:
        base = 0
        for reg, w in self.registers:
            if reg == name:
                if not 0 <= index < w:
                    raise SimulationError(f"index {index} out of range for "
                                          f"{name}[{w}]")
                return base + index
            base += w
        raise SimulationError(f"unknown register '{name}'")

    def positions(self, name: str) -> tuple[int, ...]:
        return tuple(self.position(name, i) for i in range(self.width(name)))


@dataclass(frozen=True)
class QuantumState:
    layout: RegisterLayout
    amps: np.ndarray  # complex128, length 2**n, unit norm

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "QuantumState":
        return QuantumState(self.layout, self.amps.copy())


def init_state(layout: RegisterLayout,
               initial: dict[tuple[str, int], int] | None = None) -> QuantumState:
    """All qubits |0>, with the given (register, index) -> bit assignments."""
    n = layout.n_qubits
    index = 0
    for (name, i), bit in (initial or {}).items():
        if bit not in (0, 1):
            raise SimulationError(f"initial bit for {name}[{i}] must be 0 or 1")
        if bit:
            index |= 1 << layout.position(name, i)
    amps = np.zeros(2 ** n, dtype=np.complex128)
    amps[index] = 1.0
    return QuantumState(layout, amps)


def state_from_amplitudes(layout: RegisterLayout, amps) -> QuantumState:
    arr = np.asarray(amps, dtype=np.complex128).reshape(-1)
    if arr.shape[0] != 2 ** layout.n_qubits:
        raise SimulationError(f"amplitude vector has length {arr.shape[0]}, "
                              f"expected {2 ** layout.n_qubits}")
    nrm = np.linalg.norm(arr)
    if abs(nrm - 1.0) > 1e-6:
        raise SimulationError(f"state vector norm {nrm:.6f} is not 1")
    return QuantumState(layout, arr / nrm)


# -- gate library -------------------------------------------------------------

_SQ2 = 1.0 / math.sqrt(2.0)


def _rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]],
                    dtype=complex)


def _phase(phi: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)


def _cnot() -> np.ndarray:
    # matrix bit 0 = target, bit 1 = control
    m = np.eye(4, dtype=complex)
    m[[2, 3]] = m[[3, 2]]
    return m


def _swap() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[1, 2]] = m[[2, 1]]
    return m


def _cphase(phi: float) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[3, 3] = np.exp(1j * phi)
    return m


def _toffoli() -> np.ndarray:
    # matrix bit 0 = target, bits 1 and 2 = controls
    m = np.eye(8, dtype=complex)
    m[[6, 7]] = m[[7, 6]]
    return m


@dataclass(frozen=True)
class GateInfo:
    n_qubits: int
    n_params: int
    matrix: object  # () or (param) -> ndarray; None for non-unitary ops
    adjoint_params: object = None  # param transform giving the inverse gate
    self_adjoint: bool = False


BUILTIN_GATES: dict[str, GateInfo] = {
    "X": GateInfo(1, 0, lambda: np.array([[0, 1], [1, 0]], dtype=complex),
                  self_adjoint=True),
    "Y": GateInfo(1, 0, lambda: np.array([[0, -1j], [1j, 0]], dtype=complex),
                  self_adjoint=True),
    "Z": GateInfo(1, 0, lambda: np.diag([1, -1]).astype(complex),
                  self_adjoint=True),
    "H": GateInfo(1, 0, lambda: np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
                  self_adjoint=True),
    "S": GateInfo(1, 0, lambda: np.diag([1, 1j]).astype(complex)),
    "T": GateInfo(1, 0, lambda: np.diag([1, np.exp(0.25j * np.pi)]).astype(complex)),
    "Rx": GateInfo(1, 1, _rx, adjoint_params=lambda t: -t),
    "Ry": GateInfo(1, 1, _ry, adjoint_params=lambda t: -t),
    "Rz": GateInfo(1, 1, _rz, adjoint_params=lambda t: -t),
    "Phase": GateInfo(1, 1, _phase, adjoint_params=lambda t: -t),
    # two-qubit gates: first argument is the target, per the prototype order
    "CNOT": GateInfo(2, 0, _cnot, self_adjoint=True),
    "SWAP": GateInfo(2, 0, _swap, self_adjoint=True),
    "controlledRz": GateInfo(2, 1, _cphase, adjoint_params=lambda t: -t),
    "controlledRd": GateInfo(2, 1, None),  # angle = PI / 2**d; delegates
    "Toffoli": GateInfo(3, 0, _toffoli, self_adjoint=True),
    "PrepZ": GateInfo(1, 1, None),  # non-unitary state preparation
}

UNITARY_GATES = tuple(sorted(n for n, g in BUILTIN_GATES.items()
                             if g.matrix is not None))


def gate_matrix(name: str, params: tuple[float, ...] = ()) -> np.ndarray:
    info = BUILTIN_GATES.get(name)
    if info is None:
        raise SimulationError(f"unknown gate '{name}'")
    if name == "controlledRd":
        (d,) = params
        return _cphase(math.pi / (2.0 ** d))
    if info.matrix is None:
        raise SimulationError(f"gate '{name}' has no unitary matrix")
    if info.n_params != len(params):
        raise SimulationError(f"gate '{name}' expects {info.n_params} "
                              f"parameter(s), got {len(params)}")
    return info.matrix(*params)


# -- state evolution ----------------------------------------------------------

def _expand_rest(rest: np.ndarray, qubits: list[int]) -> np.ndarray:
    """Embed indices over the non-target qubits into full indices with the
    target-qubit bits zeroed."""
    out = rest
    for q in sorted(qubits):
        low = out & ((1 << q) - 1)
        out = ((out >> q) << (q + 1)) | low
    return out


def _apply_matrix(amps: np.ndarray, mat: np.ndarray, qubits: list[int],
                  n: int, controls: list[int] | None = None) -> np.ndarray:
    k = len(qubits)
    rest = np.arange(2 ** (n - k), dtype=np.int64)
    base = _expand_rest(rest, qubits)
    if controls:
        keep = np.ones(base.shape, dtype=bool)
        for c in controls:
            keep &= ((base >> c) & 1) == 1
        base = base[keep]
    offsets = [sum(((r >> j) & 1) << qubits[j] for j in range(k))
               for r in range(2 ** k)]
    out = amps.copy()
    block = np.stack([amps[base + off] for off in offsets])
    block = mat @ block
    for r, off in enumerate(offsets):
        out[base + off] = block[r]
    return out


def apply_gate(state: QuantumState, name: str, targets: list[int],
               params: tuple[float, ...] = ()) -> QuantumState:
    """Apply a library gate to the given global qubit positions."""
    info = BUILTIN_GATES.get(name)
    if info is None:
        raise SimulationError(f"unknown gate '{name}'")
    n = state.n_qubits
    if len(set(targets)) != len(targets):
        raise SimulationError(f"duplicate target qubits for '{name}': {targets}")
    for q in targets:
        if not 0 <= q < n:
            raise SimulationError(f"qubit position {q} out of range")
    if len(targets) != info.n_qubits:
        raise SimulationError(f"gate '{name}' acts on {info.n_qubits} qubit(s), "
                              f"got {len(targets)}")
    if name == "PrepZ":
        (bit,) = params
        return prepz(state, targets[0], int(bit))
    if info.n_params != len(params):
        raise SimulationError(f"gate '{name}' expects {info.n_params} angle "
                              f"parameter(s), got {len(params)}")
    mat = gate_matrix(name, params)
    amps = _apply_matrix(state.amps, mat, list(targets), n)
    return QuantumState(state.layout, amps)


def apply_controlled(state: QuantumState, name: str, targets: list[int],
                     controls: list[int], params: tuple[float, ...] = ()) -> QuantumState:
    """Apply a gate on targets conditioned on every control qubit being |1>."""
    if set(targets) & set(controls):
        raise SimulationError("control qubits overlap gate targets")
    if not controls:
        return apply_gate(state, name, targets, params)
    mat = gate_matrix(name, params)
    amps = _apply_matrix(state.amps, mat, list(targets), state.n_qubits,
                         controls=list(controls))
    return QuantumState(state.layout, amps)


def prepz(state: QuantumState, qubit: int, bit: int = 0) -> QuantumState:
    """Reset an unentangled qubit to a computational basis state."""
    rho = reduced_density(state, qubit)
    pur = float(np.trace(rho @ rho).real)
    if pur < 1 - 1e-9:
        raise EntangledQubitError(qubit, pur)
    p = measure_prob(state, qubit, bit)
    if p > EPS_PROJ:
        return project(state, qubit, bit)
    flipped = apply_gate(state, "X", [qubit])
    return flipped


def reduced_density(state: QuantumState, qubit: int) -> np.ndarray:
    """Partial trace onto one qubit; returns the 2x2 density matrix."""
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise SimulationError(f"qubit position {qubit} out of range")
    rest = np.arange(2 ** (n - 1), dtype=np.int64)
    base = _expand_rest(rest, [qubit])
    psi0 = state.amps[base]
    psi1 = state.amps[base + (1 << qubit)]
    rho = np.empty((2, 2), dtype=np.complex128)
    rho[0, 0] = np.vdot(psi0, psi0)
    rho[0, 1] = np.dot(psi1.conj(), psi0)
    rho[1, 0] = np.dot(psi0.conj(), psi1)
    rho[1, 1] = np.vdot(psi1, psi1)
    return rho


def purity(rho: np.ndarray) -> float:
    return float(np.trace(rho @ rho).real)


def amplitude_pair(state: QuantumState, qubit: int,
                   eps_pure: float = 1e-9) -> tuple[complex, complex]:
    """The qubit's (alpha, beta), canonicalized so the first component of
    significant magnitude is real and non-negative. Raises
    EntangledQubitError when the reduced state is not pure."""
    rho = reduced_density(state, qubit)
    pur = purity(rho)
    if pur < 1 - eps_pure:
        raise EntangledQubitError(qubit, pur)
    vals, vecs = np.linalg.eigh(rho)
    vec = vecs[:, int(np.argmax(vals))]
    return canonicalize_pair((vec[0], vec[1]))


def canonicalize_pair(pair: tuple[complex, complex]) -> tuple[complex, complex]:
    a, b = complex(pair[0]), complex(pair[1])
    lead = a if abs(a) > 1e-12 else b
    if abs(lead) <= 1e-12:
        return a, b
    phase = lead / abs(lead)
    return a / phase, b / phase


def measure_prob(state: QuantumState, qubit: int, outcome: int) -> float:
    if outcome not in (0, 1):
        raise SimulationError(f"measurement outcome must be 0 or 1, got {outcome}")
    bits = (np.arange(state.amps.shape[0]) >> qubit) & 1
    sel = bits == outcome
    return float(np.sum(np.abs(state.amps[sel]) ** 2))


def event_prob(state: QuantumState, mask: np.ndarray) -> float:
    """Probability of a basis-index event given as a boolean mask."""
    return float(np.sum(np.abs(state.amps[mask]) ** 2))


def project_event(state: QuantumState, mask: np.ndarray,
                  eps: float = EPS_PROJ) -> QuantumState:
    p = event_prob(state, mask)
    if p < eps:
        raise ZeroProbabilityError(p, "projection onto measurement event")
    amps = np.where(mask, state.amps, 0.0) / math.sqrt(p)
    return QuantumState(state.layout, amps)


def project(state: QuantumState, qubit: int, outcome: int,
            eps: float = EPS_PROJ) -> QuantumState:
    """Collapse one qubit onto an outcome and renormalize."""
    if outcome not in (0, 1):
        raise SimulationError(f"outcome must be 0 or 1, got {outcome}")
    bits = (np.arange(state.amps.shape[0]) >> qubit) & 1
    mask = bits == outcome
    p = event_prob(state, mask)
    if p < eps:
        raise ZeroProbabilityError(p, f"projection of qubit {qubit} onto {outcome}")
    amps = np.where(mask, state.amps, 0.0) / math.sqrt(p)
    return QuantumState(state.layout, amps)


def qubit_bits(state: QuantumState, qubit: int) -> np.ndarray:
    """Bit value of the given qubit for every basis index."""
    return (np.arange(state.amps.shape[0]) >> qubit) & 1


def random_product_state(layout: RegisterLayout, rng: np.random.Generator) -> QuantumState:
    """Tensor product of independent random pure qubit states."""
    n = layout.n_qubits
    amps = np.array([1.0 + 0j])
    for _ in range(n):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v = v / np.linalg.norm(v)
        # kron with qubit k as the faster-varying (lower) bit
        amps = np.kron(v, amps)
    return QuantumState(layout, amps.astype(np.complex128))


def state_dump(state: QuantumState) -> str:
    """One line per basis index: `index  re  im`, 17 significant digits."""
    lines = []
    for i, a in enumerate(state.amps):
        lines.append(f"{i}  {a.real:.17g}  {a.imag:.17g}")
    return "\n".join(lines) + "\n"


def load_state_dump(layout: RegisterLayout, text: str) -> QuantumState:
    amps = np.zeros(2 ** layout.n_qubits, dtype=np.complex128)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SimulationError(f"state dump line {lineno}: expected "
                                  f"'index re im'")
        idx = int(parts[0])
        if not 0 <= idx < amps.shape[0]:
            raise SimulationError(f"state dump line {lineno}: index {idx} out "
                                  f"of range")
        amps[idx] = float(parts[1]) + 1j * float(parts[2])
    return state_from_amplitudes(layout, amps)
