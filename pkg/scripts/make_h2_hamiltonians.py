"""Regenerate the bundled H2 qubit Hamiltonians.

Needs pyscf, which is not a runtime dependency of the package. Spin orbitals
are interleaved (alpha, beta), mapped with Jordan-Wigner, qubit 0 leftmost
(most significant bit). The Pauli decomposition is done on the dense
2^n x 2^n matrix, so this only scales to a handful of qubits.
"""

from pathlib import Path

import numpy as np
from pyscf import ao2mo, fci, gto, scf

OUT = Path(__file__).resolve().parents[1] / "src" / "rvse" / "data"


def annihilators(n):
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for j in range(n):
        m = np.ones((1, 1))
        for q in range(n):
            m = np.kron(m, z if q < j else a if q == j else eye)
        ops.append(m)
    return ops


def fermion_matrix(basis, bond=0.74):
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {bond}", basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    norb = c.shape[1]
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), norb)
    e_fci = fci.FCI(mf).kernel()[0]

    n = 2 * norb
    a = annihilators(n)
    ad = [m.T for m in a]
    dim = 2**n
    h = mol.energy_nuc() * np.eye(dim)
    for p in range(n):
        for q in range(n):
            if p % 2 == q % 2:
                h += h1[p // 2, q // 2] * ad[p] @ a[q]
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    if p % 2 != r % 2 or q % 2 != s % 2:
                        continue
                    # <pq|rs> = (pr|qs)
                    v = eri[p // 2, r // 2, q // 2, s // 2]
                    if abs(v) > 1e-14:
                        h += 0.5 * v * ad[p] @ ad[q] @ a[s] @ a[r]
    return n, h, e_fci


def pauli_decompose(n, h):
    dim = 2**n
    idx = np.arange(dim)
    parity = np.array([[bin(i & z).count("1") & 1 for i in idx] for z in idx])
    signs = 1.0 - 2.0 * parity
    terms = []
    for x in range(dim):
        v = h[idx, idx ^ x]
        traces = signs @ v
        for zm in range(dim):
            n_y = bin(x & zm).count("1")
            coeff = traces[zm] * (1j**n_y) / dim
            if abs(coeff) < 1e-12:
                continue
            word = []
            for q in range(n):
                bit = 1 << (n - 1 - q)
                xb, zb = bool(x & bit), bool(zm & bit)
                word.append("Y" if xb and zb else "X" if xb else "Z" if zb else "I")
            terms.append(("".join(word), coeff))
    return terms


def write(basis, path, title):
    n, h, e_fci = fermion_matrix(basis)
    terms = pauli_decompose(n, h)
    lines = [
        f"# {title}",
        f"# {n} qubits, Jordan-Wigner, interleaved spin orbitals, qubit 0 leftmost",
        f"# FCI energy (pyscf): {float(e_fci)!r}",
    ]
    for word, coeff in sorted(terms):
        assert abs(coeff.imag) < 1e-12, (word, coeff)
        lines.append(f"{float(coeff.real)!r} {word}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(path.name, len(terms), "terms, FCI", e_fci)


if __name__ == "__main__":
    write("sto-3g", OUT / "h2_sto3g.txt", "H2 STO-3G, R = 0.74 Angstrom")
    write("6-31g", OUT / "h2_631g.txt", "H2 6-31G, R = 0.74 Angstrom")
