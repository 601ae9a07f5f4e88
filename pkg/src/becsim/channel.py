"""Photonic reduction and Kraus export of the state-preparation channel.

The emitted photonic state is the output of a channel with a one-dimensional
input, ``rho_gamma = Phi(|0><0|)``.  Its minimal Kraus set follows from the
spectral decomposition ``rho_gamma = sum_k lambda_k |phi_k><phi_k|`` with
``K_k = sqrt(lambda_k) |phi_k><0|``; each ``K_k`` is stored as a column vector.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ChannelFileError, DimensionError, NonPhysicalStateError
from .fock import HilbertLayout
from .solver import DensityState

FORMAT_TAG = "bec-kraus-v1"
_LOAD_TRACE_TOL = 1e-8


def trace_out_qd(state: DensityState) -> np.ndarray:
    """Partial trace over the quantum-dot factor."""
    layout = state.layout
    m = layout.photonic_dim
    r = state.matrix.reshape(layout.qd_dim, m, layout.qd_dim, m)
    return np.einsum("aiaj->ij", r)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    output_dim: int
    kraus_vectors: tuple[np.ndarray, ...]
    eigenvalues: tuple[float, ...]
    clamp_tolerance: float
    modes: tuple[dict, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.kraus_vectors)

    def stacked(self) -> np.ndarray:
        """Kraus vectors as the columns of an ``output_dim x rank`` array."""
        if not self.kraus_vectors:
            return np.zeros((self.output_dim, 0), dtype=complex)
        return np.column_stack(self.kraus_vectors)

    def completeness(self) -> float:
        """``sum_k K_k^+ K_k``, a scalar because the input space is one-dimensional."""
        return float(sum(np.vdot(k, k).real for k in self.kraus_vectors))

    def reconstruct(self) -> np.ndarray:
        k = self.stacked()
        return k @ k.conj().T

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KrausChannel):
            return NotImplemented
        return (
            self.output_dim == other.output_dim
            and self.eigenvalues == other.eigenvalues
            and self.clamp_tolerance == other.clamp_tolerance
            and self.modes == other.modes
            and len(self.kraus_vectors) == len(other.kraus_vectors)
            and all(np.array_equal(a, b) for a, b in zip(self.kraus_vectors, other.kraus_vectors))
        )


def layout_modes(layout: HilbertLayout) -> tuple[dict, ...]:
    return tuple(
        {"label": f.mode_label, "polarization": f.polarization.value, "cutoff": f.cutoff_dim}
        for f in layout.factors
    )


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # first component of (near) maximal magnitude made real positive
    mags = np.abs(v)
    i = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12))[0])
    out = v * (abs(v[i]) / v[i])
    out[i] = abs(v[i])
    return out


def _tie_key(v: np.ndarray) -> tuple:
    # descending lexicographic order on (re, im) pairs; rounding keeps the
    # order stable against last-bit noise
    v = np.round(v, 12)
    return tuple(x for z in v for x in (-z.real, -z.imag))


def kraus_from_state(
    rho_gamma: np.ndarray,
    tol: float | None = None,
    layout: HilbertLayout | None = None,
) -> KrausChannel:
    """Minimal Kraus set of the state-preparation channel.

    Eigenvalues within ``tol`` of zero are dropped (default ``1e-10 * dim``);
    the survivors are renormalized to unit sum.  Eigenvalues within ``tol`` of
    each other are treated as degenerate and ordered by the lexicographically
    largest phase-fixed eigenvector.
    """
    rho = np.asarray(rho_gamma, dtype=complex)
    n = rho.shape[0]
    if rho.shape != (n, n):
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    if layout is not None and layout.photonic_dim != n:
        raise DimensionError(f"state dimension {n} != photonic dimension {layout.photonic_dim}")
    tol = 1e-10 * n if tol is None else float(tol)
    herm = (rho + rho.conj().T) / 2
    lams, vecs = np.linalg.eigh(herm)
    if lams[0] < -tol:
        raise NonPhysicalStateError(f"eigenvalue {lams[0]:.3e} below -{tol:.1e}", float(lams[0]))
    keep = lams > tol
    lams = lams[keep]
    vecs = vecs[:, keep]
    total = lams.sum()
    if not total > 0:
        raise NonPhysicalStateError("no eigenvalue above the clamp tolerance", float(total))
    lams = lams / total

    pairs = [(float(l), _fix_phase(vecs[:, j])) for j, l in enumerate(lams)]
    # bucket near-degenerate eigenvalues so ties are broken by the vectors
    pairs.sort(key=lambda p: -p[0])
    ordered: list[tuple[float, np.ndarray]] = []
    i = 0
    while i < len(pairs):
        j = i + 1
        while j < len(pairs) and pairs[i][0] - pairs[j][0] <= tol:
            j += 1
        group = pairs[i:j]
        group.sort(key=lambda p: _tie_key(p[1]))
        ordered.extend(group)
        i = j

    return KrausChannel(
        output_dim=n,
        kraus_vectors=tuple(math.sqrt(l) * v for l, v in ordered),
        eigenvalues=tuple(l for l, _ in ordered),
        clamp_tolerance=tol,
        modes=layout_modes(layout) if layout is not None else (),
    )


def channel_to_dict(channel: KrausChannel) -> dict:
    return {
        "format": FORMAT_TAG,
        "output_dim": channel.output_dim,
        "modes": [dict(m) for m in channel.modes],
        "clamp_tolerance": channel.clamp_tolerance,
        "eigenvalues": list(channel.eigenvalues),
        "kraus": [[[float(z.real), float(z.imag)] for z in k] for k in channel.kraus_vectors],
    }


def serialize_channel(channel: KrausChannel, path: str | os.PathLike) -> Path:
    """Write ``channel`` as bec-kraus-v1 JSON.

    Floats are written with ``repr`` precision, so loading gives back the
    exact same values.
    """
    path = Path(path)
    text = json.dumps(channel_to_dict(channel), indent=1) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ChannelFileError(f"cannot write {path}: {exc}") from exc
    return path


def channel_from_dict(doc: dict) -> KrausChannel:
    if doc.get("format") != FORMAT_TAG:
        raise ChannelFileError(f"unsupported format {doc.get('format')!r}, expected {FORMAT_TAG!r}")
    try:
        n = int(doc["output_dim"])
        lams = tuple(float(x) for x in doc["eigenvalues"])
        vecs = tuple(np.array([complex(re, im) for re, im in k], dtype=complex) for k in doc["kraus"])
        tol = float(doc["clamp_tolerance"])
        modes = tuple(dict(m) for m in doc.get("modes", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelFileError(f"malformed channel document: {exc}") from exc
    if len(vecs) != len(lams) or any(v.shape != (n,) for v in vecs):
        raise ChannelFileError("kraus vectors do not match eigenvalues/output_dim")
    if abs(sum(lams) - 1.0) > _LOAD_TRACE_TOL:
        raise ChannelFileError(f"eigenvalues sum to {sum(lams):.12g}, not 1")
    return KrausChannel(n, vecs, lams, tol, modes)


def load_channel(path: str | os.PathLike) -> KrausChannel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ChannelFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ChannelFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return channel_from_dict(doc)
