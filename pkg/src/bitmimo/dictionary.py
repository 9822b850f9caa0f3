"""Sparse-representation machinery for the delay-angle grid.

Builds, per transmit band m:

    U_m (N x MN):   (U_m)[n, l] = exp( j*2*pi*(xi_m + zeta_n)*(-1 + 2l/MN) )
    V_m (L x ML):   (V_m)[i, l] = exp(-j*2*pi*(i/T0 + f_m) * T0*l/(ML) )

with tone index i running over -(L-1)/2 .. (L-1)/2, and stacks the Kronecker
blocks into the dictionary Phi = [V_0 (x) U_0; ...; V_{M-1} (x) U_{M-1}] of
shape MNL x M^2NL, so that ctilde = Phi a for the sparse scene vector a.

Two orderings of the coefficient vector coexist:

    ctilde (band-major):  position(m, i, n) = m*N*L + i_idx*N + n
    c      (tone-major):  position(i, m, n) = i_idx*M*N + m*N + n

with i_idx = i + (L-1)/2. `perm` maps between them: c = ctilde[perm].

The sample-domain operator Fbar = F_L^H (x) I_P uses the unitary L-point DFT
throughout; apply_fbar / apply_fbar_adjoint implement it matrix-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import RadarConfig, TargetScene, config_from_dict, config_to_dict

__all__ = [
    "SteeringDictionary",
    "build_dictionary",
    "eval_c_direct",
    "coherence",
    "apply_fbar",
    "apply_fbar_adjoint",
    "fbar_matrix",
    "save_dictionary",
    "load_dictionary",
]

DEFAULT_MEMORY_CAP = 2 << 30  # bytes allowed for the dense Phi

CONVENTION_TAG = "unitary-dft/0-based-vec"


@dataclass(frozen=True)
class SteeringDictionary:
    """Steering matrices, dense dictionary and the ctilde->c permutation.

    Phi may be None when built matrix-free (memory-capped); the apply methods
    then fall back to blockwise Kronecker products.
    """

    config: RadarConfig
    U: np.ndarray          # (M, N, MN)
    V: np.ndarray          # (M, L, ML)
    Phi: np.ndarray | None # (MNL, M^2NL) dense or None
    perm: np.ndarray       # c = ctilde[perm]
    iperm: np.ndarray      # ctilde = c[iperm]

    @property
    def n_rows(self) -> int:
        return self.config.mnl

    @property
    def n_atoms(self) -> int:
        return self.config.grid_size

    def apply(self, a: np.ndarray) -> np.ndarray:
        """ctilde = Phi @ a."""
        if self.Phi is not None:
            return self.Phi @ a
        cfg = self.config
        A = a.reshape(cfg.ml, cfg.mn).T  # a = vec(A), column-major
        out = np.empty(cfg.mnl, dtype=complex)
        for m in range(cfg.M):
            C = self.U[m] @ A @ self.V[m].T            # (N, L)
            out[m * cfg.N * cfg.L:(m + 1) * cfg.N * cfg.L] = C.flatten(order="F")
        return out

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Phi^H @ y."""
        if self.Phi is not None:
            return self.Phi.conj().T @ y
        cfg = self.config
        Z = np.zeros((cfg.mn, cfg.ml), dtype=complex)
        for m in range(cfg.M):
            Y = y[m * cfg.N * cfg.L:(m + 1) * cfg.N * cfg.L].reshape(cfg.N, cfg.L, order="F")
            Z += self.U[m].conj().T @ Y @ self.V[m].conj()
        return Z.T.reshape(-1)  # vec (column-major) of the MN x ML matrix

    def apply_cells(self, cells: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        """Phi restricted to the given grid cells times alpha (fast K-sparse apply)."""
        if self.Phi is not None:
            return self.Phi[:, cells] @ alpha
        cfg = self.config
        l1 = np.asarray(cells) // cfg.mn
        l2 = np.asarray(cells) % cfg.mn
        out = np.empty(cfg.mnl, dtype=complex)
        for m in range(cfg.M):
            # column for cell (l1,l2) in block m is kron(V[:,l1], U[:,l2])
            cols = self.V[m][:, l1][:, None, :] * self.U[m][:, l2][None, :, :]
            out[m * cfg.N * cfg.L:(m + 1) * cfg.N * cfg.L] = (
                cols.reshape(cfg.N * cfg.L, -1) @ alpha)
        return out


def _permutation_maps(M, N, L):
    i_idx, m, n = np.meshgrid(np.arange(L), np.arange(M), np.arange(N), indexing="ij")
    pos_c = (i_idx * M + m) * N + n
    pos_ct = (m * L + i_idx) * N + n
    perm = np.empty(M * N * L, dtype=np.int64)
    perm[pos_c.ravel()] = pos_ct.ravel()
    iperm = np.argsort(perm)
    return perm, iperm


def build_dictionary(config: RadarConfig, dense=True,
                     memory_cap_bytes=DEFAULT_MEMORY_CAP) -> SteeringDictionary:
    """Construct steering matrices, the dense Phi (unless capped) and perm maps."""
    M, N, L = config.M, config.N, config.L
    mn, ml = config.mn, config.ml
    tones = config.tone_indices

    angle = -1.0 + 2.0 * np.arange(mn) / mn                    # theta grid
    virt = config.tx_pos[:, None] + config.rx_pos[None, :]     # (M, N)
    U = np.exp(2j * np.pi * virt[:, :, None] * angle[None, None, :])

    delay_frac = np.arange(ml) / ml                            # tau / T0 grid
    freq = tones[None, :, None] + (config.tone_offsets * config.pri)[:, None, None]
    V = np.exp(-2j * np.pi * freq * delay_frac[None, None, :])

    Phi = None
    if dense:
        nbytes = config.mnl * config.grid_size * 16
        if nbytes > memory_cap_bytes:
            raise ValueError(
                f"dense dictionary needs {nbytes} bytes, above the cap "
                f"{memory_cap_bytes}; build with dense=False for matrix-free applies")
        Phi = np.empty((config.mnl, config.grid_size), dtype=complex)
        for m in range(M):
            Phi[m * N * L:(m + 1) * N * L] = np.kron(V[m], U[m])

    perm, iperm = _permutation_maps(M, N, L)
    return SteeringDictionary(config=config, U=U, V=V, Phi=Phi, perm=perm, iperm=iperm)


def eval_c_direct(scene: TargetScene, config: RadarConfig) -> np.ndarray:
    """Closed-form Fourier coefficients, band-major (ctilde) order.

    c_{m,n}[i] = sum_k alpha_k exp(j*2*pi*((xi_m+zeta_n)*theta_k
                                           - i*tau_k/T0 - f_m*tau_k))

    evaluated directly from the scene, independent of the dictionary machinery;
    serves as the brute-force oracle for Phi.
    """
    M, N, L = config.M, config.N, config.L
    out = np.zeros(config.mnl, dtype=complex)
    if scene.k == 0:
        return out
    tau = scene.delays(config)
    theta = scene.angle_sines(config)
    tones = config.tone_indices
    for m in range(M):
        virt = config.tx_pos[m] + config.rx_pos                      # (N,)
        phase = (virt[None, :, None] * theta[None, None, :]
                 - tones[:, None, None] * (tau / config.pri)[None, None, :]
                 - (config.tone_offsets[m] * tau)[None, None, :])    # (L, N, K)
        cm = np.exp(2j * np.pi * phase) @ scene.alpha                # (L, N)
        out[m * N * L:(m + 1) * N * L] = cm.reshape(-1)              # tone-major
    return out


def coherence(A: np.ndarray, chunk=256) -> float:
    """Largest absolute normalized inner product between distinct columns."""
    A = np.asarray(A)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError("coherence is undefined for matrices with zero columns")
    An = A / norms
    n = A.shape[1]
    mu = 0.0
    for start in range(0, n, chunk):
        block = An[:, start:start + chunk]
        g = np.abs(block.conj().T @ An)
        for r in range(g.shape[0]):
            g[r, start + r] = 0.0
        mu = max(mu, float(g.max()))
    return min(mu, 1.0)


# -- sample-domain DFT operator Fbar = F_L^H (x) I_P ----------------------

def apply_fbar(x: np.ndarray, L: int, P: int) -> np.ndarray:
    """y = (F_L^H (x) I_P) x with the unitary L-point DFT F_L."""
    x = np.asarray(x)
    if x.shape[-1] != L * P:
        raise ValueError(f"expected length {L * P}, got {x.shape[-1]}")
    X = x.reshape(x.shape[:-1] + (L, P))
    return (np.fft.ifft(X, axis=-2) * np.sqrt(L)).reshape(x.shape)


def apply_fbar_adjoint(y: np.ndarray, L: int, P: int) -> np.ndarray:
    """x = (F_L (x) I_P) y, the adjoint (= inverse) of apply_fbar."""
    y = np.asarray(y)
    if y.shape[-1] != L * P:
        raise ValueError(f"expected length {L * P}, got {y.shape[-1]}")
    Y = y.reshape(y.shape[:-1] + (L, P))
    return (np.fft.fft(Y, axis=-2) / np.sqrt(L)).reshape(y.shape)


def fbar_matrix(L: int, P: int) -> np.ndarray:
    """Dense PL x PL matrix F_L^H (x) I_P (unitary DFT convention)."""
    F = np.fft.fft(np.eye(L)) / np.sqrt(L)
    return np.kron(F.conj().T, np.eye(P))


# -- export / import -------------------------------------------------------

def save_dictionary(d: SteeringDictionary, path) -> None:
    """Binary array bundle with a JSON header (dims, convention tag, config)."""
    header = {
        "convention": CONVENTION_TAG,
        "dims": {"M": d.config.M, "N": d.config.N, "L": d.config.L,
                 "rows": d.n_rows, "atoms": d.n_atoms},
        "config": config_to_dict(d.config),
        "dense": d.Phi is not None,
    }
    arrays = {"U": d.U, "V": d.V, "perm": d.perm,
              "header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    if d.Phi is not None:
        arrays["Phi"] = d.Phi
    np.savez(path, **arrays)


def load_dictionary(path) -> SteeringDictionary:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header["convention"] != CONVENTION_TAG:
            raise ValueError(f"unsupported dictionary convention {header['convention']!r}")
        config = config_from_dict(header["config"])
        U, V, perm = data["U"], data["V"], data["perm"]
        Phi = data["Phi"] if "Phi" in data.files else None
    return SteeringDictionary(config=config, U=U, V=V, Phi=Phi,
                              perm=perm, iperm=np.argsort(perm))
