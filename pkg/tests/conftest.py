import numpy as np
import pytest

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)

# acceptance criterion -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def loop_partial_trace_h(rho, d, dk):
    """sum_i <i|_H rho |i>_H with explicit loops."""
    out = np.zeros((dk, dk), dtype=complex)
    for i in range(d):
        for k in range(dk):
            for l in range(dk):
                out[k, l] += rho[i * dk + k, i * dk + l]
    return out


def loop_partial_trace_k(rho, d, dk):
    out = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            for k in range(dk):
                out[i, j] += rho[i * dk + k, j * dk + k]
    return out


def entropy_oracle(rho):
    lam = np.linalg.eigvalsh(rho)
    return float(sum(-x * np.log(x) for x in lam if x > 1e-15))


def affine_depolarize(rho, p):
    d = rho.shape[0]
    return (1 - p) * rho + p * np.trace(rho) * np.eye(d) / d


def bloch_state(n):
    """(I + n.sigma)/2 for an array of Bloch vectors of shape (..., 3)."""
    return (np.eye(2) + np.einsum("...i,iab->...ab", n, PAULI)) / 2


def bloch_vector(rho):
    return np.real(np.einsum("iab,ba->i", PAULI, rho))


def grid_two_member_h_hat(channel_apply, rho, step=0.02):
    """Brute-force min over two-member pure decompositions of a qubit state.

    For each pure state n1 on a (theta, phi) grid, the second member is the
    other intersection of the line through n1 and r = bloch(rho) with the
    sphere; weights follow from r = q n1 + (1 - q) n2.
    """
    r = bloch_vector(rho)
    theta = np.arange(0, np.pi + 1e-12, step)
    phi = np.arange(0, 2 * np.pi, step)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    n1 = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1).reshape(-1, 3)
    v = r - n1
    vv = np.sum(v * v, -1)
    t = -2 * np.sum(n1 * v, -1) / vv
    n2 = n1 + t[:, None] * v
    q1 = (t - 1) / t

    def ent(n):
        out = channel_apply(bloch_state(n))
        lam = np.clip(np.linalg.eigvalsh(out), 1e-300, None)
        return -np.sum(lam * np.log(lam), -1)

    vals = q1 * ent(n1) + (1 - q1) * ent(n2)
    return float(np.min(vals))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
