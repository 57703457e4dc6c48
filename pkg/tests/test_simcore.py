"""Statevector core: gate application against an independent dense-matrix
oracle, partial trace, amplitude extraction, projection, probabilities."""
import math

import numpy as np
import pytest

from scaffcheck import simcore
from scaffcheck.simcore import (
    EntangledQubitError, RegisterLayout, SimulationError, ZeroProbabilityError,
    amplitude_pair, apply_controlled, apply_gate, event_prob, gate_matrix,
    init_state, measure_prob, project, project_event, purity,
    random_product_state, reduced_density, state_dump, state_from_amplitudes,
)

SQ2 = 1.0 / math.sqrt(2.0)


def layout(*regs):
    return RegisterLayout(tuple(regs))


def basis_state(lay, index):
    amps = np.zeros(2 ** lay.n_qubits, dtype=complex)
    amps[index] = 1.0
    return state_from_amplitudes(lay, amps)


def bell_state():
    lay = layout(("a", 1), ("b", 1))
    return state_from_amplitudes(lay, np.array([SQ2, 0, 0, SQ2], dtype=complex))


# -- independent oracle: embed a k-qubit matrix into the full space ----------

def full_matrix(mat, targets, n, controls=()):
    """Explicit 2^n x 2^n matrix for `mat` on `targets` (matrix bit j is
    targets[j]), controlled on `controls`; built by direct index arithmetic,
    independent of the production apply path."""
    k = len(targets)
    N = 2 ** n
    full = np.zeros((N, N), dtype=complex)
    tmask = sum(1 << q for q in targets)
    for col in range(N):
        if controls and not all((col >> c) & 1 for c in controls):
            full[col, col] = 1.0
            continue
        sub_col = sum(((col >> targets[j]) & 1) << j for j in range(k))
        rest = col & ~tmask
        for sub_row in range(2 ** k):
            row = rest | sum(((sub_row >> j) & 1) << targets[j] for j in range(k))
            full[row, col] = mat[sub_row, sub_col]
    return full


def brute_force_reduced(amps, qubit, n):
    """Partial trace via explicit basis enumeration."""
    rho = np.zeros((2, 2), dtype=complex)
    for i in range(2 ** n):
        for j in range(2 ** n):
            if (i & ~(1 << qubit)) != (j & ~(1 << qubit)):
                continue
            a = (i >> qubit) & 1
            b = (j >> qubit) & 1
            rho[a, b] += amps[i] * np.conj(amps[j])
    return rho


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


PARAM_CASES = [
    ("X", ()), ("Y", ()), ("Z", ()), ("H", ()), ("S", ()), ("T", ()),
    ("Rx", (0.7,)), ("Ry", (1.3,)), ("Rz", (2.1,)), ("Phase", (0.9,)),
    ("CNOT", ()), ("SWAP", ()), ("controlledRz", (0.5,)), ("Toffoli", ()),
]


@pytest.mark.parametrize("name,params", PARAM_CASES)
@pytest.mark.parametrize("n", [2, 3, 4])
def test_apply_matches_matrix_oracle(name, params, n):
    info = simcore.BUILTIN_GATES[name]
    if info.n_qubits > n:
        pytest.skip("gate wider than register")
    rng = np.random.default_rng(42)
    lay = layout(("q", n))
    for targets in ([0, 1, 2][:info.n_qubits], [n - 1, 0, 1][:info.n_qubits]):
        if len(set(targets)) != len(targets):
            continue
        mat = gate_matrix(name, params)
        oracle = full_matrix(mat, targets, n)
        for _ in range(5):
            amps = random_state(rng, n)
            state = state_from_amplitudes(lay, amps)
            got = apply_gate(state, name, list(targets), params)
            expect = oracle @ amps
            assert np.allclose(got.amps, expect, atol=1e-12)


def test_unitarity_norm_and_adjoint_1000_states():
    rng = np.random.default_rng(7)
    lay3 = layout(("q", 3))
    names = list(simcore.UNITARY_GATES)
    per_gate = 1000 // len(names) + 1
    for name in names:
        info = simcore.BUILTIN_GATES[name]
        params = tuple(rng.uniform(0, 2 * np.pi) for _ in range(info.n_params)) \
            if name != "controlledRd" else (2.0,)
        targets = list(range(info.n_qubits))
        for _ in range(per_gate):
            state = state_from_amplitudes(lay3, random_state(rng, 3))
            out = apply_gate(state, name, targets, params)
            assert abs(out.norm() - 1.0) < 1e-10
            if info.self_adjoint:
                back = apply_gate(out, name, targets, params)
            elif info.adjoint_params is not None:
                back = apply_gate(out, name, targets,
                                  tuple(info.adjoint_params(p) for p in params))
            elif name == "S":
                back = out
                for _ in range(3):
                    back = apply_gate(back, "S", targets)
            elif name == "T":
                back = out
                for _ in range(7):
                    back = apply_gate(back, "T", targets)
            elif name == "controlledRd":
                continue
            assert np.allclose(back.amps, state.amps, atol=1e-10)


def test_controlled_rd_is_pi_over_power_of_two_phase():
    lay = layout(("q", 2))
    state = basis_state(lay, 0b11)
    for d in (1, 2, 3):
        out = apply_gate(state, "controlledRd", [0, 1], (float(d),))
        expect = np.exp(1j * math.pi / 2 ** d)
        assert np.allclose(out.amps[0b11], expect, atol=1e-12)


# -- init_state ---------------------------------------------------------------

def test_init_default_all_zero():
    st = init_state(layout(("q", 2)))
    assert np.allclose(st.amps, [1, 0, 0, 0])


def test_init_assignment_flips_bit():
    st = init_state(layout(("q", 2)), {("q", 0): 1})
    assert np.allclose(st.amps, [0, 1, 0, 0])  # qubit 0 is the LSB


def test_empty_layout_rejected():
    with pytest.raises(SimulationError, match="empty layout"):
        RegisterLayout(())


def test_layout_positions_are_a_bijection():
    lay = layout(("a", 2), ("b", 3))
    positions = [lay.position(r, i) for r, w in lay.registers for i in range(w)]
    assert sorted(positions) == list(range(lay.n_qubits))


# -- worked examples ----------------------------------------------------------

def test_h_on_zero_gives_sqrt_half_amplitudes():
    st = apply_gate(init_state(layout(("q", 1))), "H", [0])
    assert np.allclose(st.amps, [SQ2, SQ2], atol=1e-12)


def test_x_on_zero_gives_one():
    st = apply_gate(init_state(layout(("q", 1))), "X", [0])
    assert np.allclose(st.amps, [0, 1], atol=1e-12)


def test_cnot_first_argument_is_target():
    # control |1>, target |0> -> target flips
    lay = layout(("t", 1), ("c", 1))
    st = init_state(lay, {("c", 0): 1})
    out = apply_gate(st, "CNOT", [lay.position("t", 0), lay.position("c", 0)])
    assert np.allclose(out.amps[0b11], 1.0)


def test_rx_pi_on_zero():
    # oracle: multiply the Rx matrix by (1, 0)
    expect = gate_matrix("Rx", (math.pi,)) @ np.array([1, 0], dtype=complex)
    st = apply_gate(init_state(layout(("q", 1))), "Rx", [0], (math.pi,))
    assert np.allclose(st.amps, expect, atol=1e-12)
    assert np.allclose(expect, [0, -1j], atol=1e-12)


def test_swap_equals_three_alternating_cnots():
    rng = np.random.default_rng(3)
    lay = layout(("q", 2))
    for _ in range(20):
        st = state_from_amplitudes(lay, random_state(rng, 2))
        swapped = apply_gate(st, "SWAP", [0, 1])
        three = apply_gate(st, "CNOT", [0, 1])
        three = apply_gate(three, "CNOT", [1, 0])
        three = apply_gate(three, "CNOT", [0, 1])
        assert np.allclose(swapped.amps, three.amps, atol=1e-12)


# -- reduced density ----------------------------------------------------------

def test_reduced_density_product_state():
    st = apply_gate(init_state(layout(("a", 1), ("b", 1))), "H", [0])
    rho = reduced_density(st, 0)
    assert np.allclose(rho, [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)
    assert abs(purity(rho) - 1.0) < 1e-12


def test_reduced_density_bell_is_maximally_mixed():
    st = bell_state()
    for q in (0, 1):
        rho = reduced_density(st, q)
        assert np.allclose(rho, [[0.5, 0], [0, 0.5]], atol=1e-12)


def test_reduced_density_one_state():
    st = init_state(layout(("q", 1)), {("q", 0): 1})
    assert np.allclose(reduced_density(st, 0), [[0, 0], [0, 1]], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_reduced_density_matches_brute_force(n):
    rng = np.random.default_rng(11 + n)
    lay = layout(("q", n))
    for _ in range(10):
        amps = random_state(rng, n)
        st = state_from_amplitudes(lay, amps)
        for q in range(n):
            got = reduced_density(st, q)
            expect = brute_force_reduced(amps, q, n)
            assert np.allclose(got, expect, atol=1e-12)
            assert np.allclose(got, got.conj().T, atol=1e-12)
            assert abs(np.trace(got).real - 1.0) < 1e-12
            vals = np.linalg.eigvalsh(got)
            assert np.all(vals > -1e-12) and np.all(vals < 1 + 1e-12)


# -- amplitude extraction -----------------------------------------------------

def test_amplitude_pair_h_state():
    st = apply_gate(init_state(layout(("a", 1))), "H", [0])
    a, b = amplitude_pair(st, 0)
    assert abs(a - SQ2) < 1e-9 and abs(b - SQ2) < 1e-9


def test_amplitude_pair_basis_one():
    st = init_state(layout(("q", 1)), {("q", 0): 1})
    a, b = amplitude_pair(st, 0)
    assert abs(a) < 1e-12 and abs(b - 1) < 1e-12


def test_amplitude_pair_bell_raises_with_purity_half():
    st = bell_state()
    with pytest.raises(EntangledQubitError) as exc:
        amplitude_pair(st, 0)
    assert abs(exc.value.purity - 0.5) < 1e-12


def test_amplitude_pair_roundtrip_product_states():
    rng = np.random.default_rng(5)
    lay = layout(("q", 4))
    for _ in range(25):
        qubit_states = []
        amps = np.array([1.0 + 0j])
        for _q in range(4):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            qubit_states.append(v)
            amps = np.kron(v, amps)
        st = state_from_amplitudes(lay, amps)
        for q in range(4):
            a, b = amplitude_pair(st, q)
            va, vb = simcore.canonicalize_pair((qubit_states[q][0], qubit_states[q][1]))
            assert abs(a - va) < 1e-9 and abs(b - vb) < 1e-9


def test_canonical_first_significant_component_real_nonneg():
    rng = np.random.default_rng(9)
    for _ in range(50):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        a, b = simcore.canonicalize_pair((v[0], v[1]))
        lead = a if abs(a) > 1e-12 else b
        assert abs(lead.imag) < 1e-12 and lead.real >= 0


# -- probabilities and projection --------------------------------------------

def test_measure_prob_h_state():
    st = apply_gate(init_state(layout(("q", 1))), "H", [0])
    assert abs(measure_prob(st, 0, 0) - 0.5) < 1e-12


def test_measure_prob_basis():
    st = init_state(layout(("q", 1)))
    assert measure_prob(st, 0, 0) == pytest.approx(1.0)


def test_measure_prob_bell_qubit1():
    assert abs(measure_prob(bell_state(), 1, 1) - 0.5) < 1e-12


def test_measure_prob_sums_to_one_and_matches_density():
    rng = np.random.default_rng(13)
    lay = layout(("q", 3))
    for _ in range(10):
        st = state_from_amplitudes(lay, random_state(rng, 3))
        for q in range(3):
            p0, p1 = measure_prob(st, q, 0), measure_prob(st, q, 1)
            assert abs(p0 + p1 - 1) < 1e-12
            rho = reduced_density(st, q)
            assert abs(p0 - rho[0, 0].real) < 1e-12
            assert abs(p1 - rho[1, 1].real) < 1e-12


def test_project_bell_onto_zero_gives_00():
    out = project(bell_state(), 0, 0)
    assert np.allclose(out.amps, [1, 0, 0, 0], atol=1e-12)


def test_project_impossible_outcome():
    st = init_state(layout(("q", 1)))
    with pytest.raises(ZeroProbabilityError):
        project(st, 0, 1)


def test_project_h_state_onto_zero():
    st = apply_gate(init_state(layout(("q", 1))), "H", [0])
    out = project(st, 0, 0)
    assert np.allclose(out.amps, [1, 0], atol=1e-12)


def test_event_prob_and_project_event():
    st = bell_state()
    idx = np.arange(4)
    mask = ((idx >> 0) & 1) == ((idx >> 1) & 1)  # equal-bits event
    assert abs(event_prob(st, mask) - 1.0) < 1e-12
    mask_ne = ~mask
    with pytest.raises(ZeroProbabilityError):
        project_event(st, mask_ne)


# -- controlled application ---------------------------------------------------

@pytest.mark.parametrize("n,targets,controls", [
    (3, [0], [1, 2]), (3, [2], [0]), (4, [1], [3]), (4, [0, 2], [3]),
])
def test_apply_controlled_matches_oracle(n, targets, controls):
    rng = np.random.default_rng(17)
    lay = layout(("q", n))
    mat = gate_matrix("H") if len(targets) == 1 else gate_matrix("SWAP")
    name = "H" if len(targets) == 1 else "SWAP"
    oracle = full_matrix(mat, targets, n, controls=controls)
    for _ in range(5):
        amps = random_state(rng, n)
        st = state_from_amplitudes(lay, amps)
        got = apply_controlled(st, name, targets, controls)
        assert np.allclose(got.amps, oracle @ amps, atol=1e-12)


def test_prepz_resets_unentangled_qubit():
    st = apply_gate(init_state(layout(("q", 2))), "H", [0])
    out = simcore.prepz(st, 0, 0)
    assert np.allclose(out.amps, [1, 0, 0, 0], atol=1e-12)
    out1 = simcore.prepz(init_state(layout(("q", 1))), 0, 1)
    assert np.allclose(out1.amps, [0, 1], atol=1e-12)


def test_prepz_entangled_rejected():
    with pytest.raises(EntangledQubitError):
        simcore.prepz(bell_state(), 0, 0)


# -- dumps --------------------------------------------------------------------

def test_state_dump_roundtrip():
    rng = np.random.default_rng(23)
    lay = layout(("q", 2))
    st = state_from_amplitudes(lay, random_state(rng, 2))
    text = state_dump(st)
    back = simcore.load_state_dump(lay, text)
    assert np.allclose(back.amps, st.amps, atol=1e-15)
    line = text.splitlines()[0].split()
    assert line[0] == "0" and len(line) == 3


def test_random_product_state_is_seeded_and_product():
    lay = layout(("q", 3))
    s1 = random_product_state(lay, np.random.default_rng(99))
    s2 = random_product_state(lay, np.random.default_rng(99))
    assert np.array_equal(s1.amps, s2.amps)
    for q in range(3):
        assert purity(reduced_density(s1, q)) > 1 - 1e-12
