"""Concrete complex Clifford algebra representations.

Convention: Clifford multiplication squares to minus the norm,

    v . v . phi = -|v|^2 phi,

so every generator is skew-hermitian and unitary.  With this choice the
divergence identity for the Witten 1-form carries ``+R/4`` and the spin
connection reads ``d + 1/4 sum_bc omega_bc gamma_b gamma_c``.  Both sign
conventions are common in the literature, so be careful when comparing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CliffordRep",
    "build_clifford",
    "clifford_mul",
    "commutator_action",
]

_SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class CliffordRep:
    """Irreducible representation of Cl(n) on spinors of size ``2**(n//2)``.

    ``gamma`` has shape ``(dim, fiber_dim, fiber_dim)``.
    """

    dim: int
    gamma: np.ndarray

    def __post_init__(self):
        self.gamma.setflags(write=False)

    @property
    def fiber_dim(self) -> int:
        return self.gamma.shape[1]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.fiber_dim, dtype=complex)

    def vector(self, v) -> np.ndarray:
        """Matrix of Clifford multiplication by ``v`` (orthonormal components).

        ``v`` may carry leading batch axes; the result has shape
        ``v.shape[:-1] + (F, F)``.
        """
        v = np.asarray(v)
        if v.shape[-1] != self.dim:
            raise ValueError(f"vector has {v.shape[-1]} components, expected {self.dim}")
        return np.einsum("...a,aij->...ij", v, self.gamma)

    def commutator(self, a: int, b: int) -> np.ndarray:
        self._check_index(a)
        self._check_index(b)
        ga, gb = self.gamma[a], self.gamma[b]
        return ga @ gb - gb @ ga

    def commutators(self) -> np.ndarray:
        """All ``[gamma_a, gamma_b]`` as an ``(n, n, F, F)`` array."""
        prod = np.einsum("aij,bjk->abik", self.gamma, self.gamma)
        return prod - prod.transpose(1, 0, 2, 3)

    def products(self) -> np.ndarray:
        """All ``gamma_a gamma_b`` as an ``(n, n, F, F)`` array."""
        return np.einsum("aij,bjk->abik", self.gamma, self.gamma)

    def _check_index(self, a: int) -> None:
        if not 0 <= a < self.dim:
            raise IndexError(f"generator index {a} out of range for dim {self.dim}")


def build_clifford(dim: int) -> CliffordRep:
    """Build generators for Cl(dim) by adding one generator per step.

    Even -> odd appends the (normalised) volume element; odd -> even
    doubles the fiber, tensoring the old generators with sigma_1 and adding
    ``1 (x) i sigma_2``.
    """
    if int(dim) != dim or dim < 1:
        raise ValueError(f"Clifford dimension must be a positive integer, got {dim!r}")
    gammas = [np.array([[1j]])]
    for n in range(2, int(dim) + 1):
        if n % 2 == 0:
            size = gammas[0].shape[0]
            gammas = [np.kron(g, _SIGMA1) for g in gammas]
            gammas.append(np.kron(np.eye(size), 1j * _SIGMA2))
        else:
            vol = gammas[0]
            for g in gammas[1:]:
                vol = vol @ g
            # vol is unitary with vol^2 = +-1; rescale so the square is -1
            if np.allclose(vol @ vol, np.eye(vol.shape[0])):
                vol = 1j * vol
            gammas.append(vol)
    return CliffordRep(dim=int(dim), gamma=np.array(gammas, dtype=complex))


def clifford_mul(rep: CliffordRep, vector_components, spinor) -> np.ndarray:
    """``(sum_a v_a gamma_a) phi``; batch axes on both inputs broadcast."""
    spinor = np.asarray(spinor)
    if spinor.shape[-1] != rep.fiber_dim:
        raise ValueError(f"spinor has {spinor.shape[-1]} components, expected {rep.fiber_dim}")
    return np.einsum("...ij,...j->...i", rep.vector(vector_components), spinor)


def commutator_action(rep: CliffordRep, a: int, b: int, spinor) -> np.ndarray:
    spinor = np.asarray(spinor)
    if spinor.shape[-1] != rep.fiber_dim:
        raise ValueError(f"spinor has {spinor.shape[-1]} components, expected {rep.fiber_dim}")
    return np.einsum("ij,...j->...i", rep.commutator(a, b), spinor)
