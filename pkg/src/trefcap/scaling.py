"""Shape-keyed cache of boundary capacitance matrices.

The boundary capacitance matrix of a uniformly scaled domain is the
original matrix divided by the scale factor: the scaled H and G factor
into diagonal scale matrices times the originals, and those diagonals
cancel to 1/s when forming G^-1 H (the zero H-row of the constant
weighting function absorbs its zero radial factor).  The cache therefore
assembles one matrix per translation/scale equivalence class of meshes,
stores it for the normalized (centroid-centred, radius-one)
representative, and answers every similar query by scalar rescaling.
"""

from __future__ import annotations

import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

from .assembly import Bcm, compute_bcm
from .errors import CacheFileError, InvalidScaleError
from .geometry import BoundaryMesh, ShapeSignature, normalize, signature as mesh_signature

__all__ = ["CachedBcm", "BcmCache", "CacheStats", "scale_bcm"]

# Loaded cache entries must satisfy the zero-row-sum identity to this level.
_ROW_SUM_TOL = 1e-9


def scale_bcm(bcm: Bcm, s: float) -> Bcm:
    """Boundary capacitance matrix of the same mesh scaled by s > 0:
    entries divide by s, node coordinates and weights multiply by s."""
    if not s > 0:
        raise InvalidScaleError(f"scale factor must be positive, got {s}")
    return Bcm(
        matrix=bcm.matrix / s,
        node_points=bcm.node_points * s,
        node_element_lengths=bcm.node_element_lengths * s,
        basis_policy_id=bcm.basis_policy_id,
        cond_estimate_G=bcm.cond_estimate_G,
    )


@dataclass(frozen=True)
class CachedBcm:
    """Stored matrix for the normalized representative of one shape class."""

    reference_scale: float
    bcm: Bcm


@dataclass
class CacheStats:
    assemblies: int = 0
    hits: int = 0
    misses: int = 0

    @property
    def lookups(self) -> int:
        return self.hits + self.misses

    def as_tuple(self):
        return (self.assemblies, self.hits, self.misses)


class BcmCache:
    """LRU-bounded map from shape signatures to stored matrices.

    Concurrent lookups are permitted; insertion is single-writer, so two
    threads racing on the same signature may both assemble but only the
    first result is stored (and returned consistently thereafter).  With
    enabled=False every request is computed fresh, which is useful for
    timing comparisons.
    """

    def __init__(self, max_entries: int = 4096, enabled: bool = True):
        if max_entries < 1:
            raise ValueError("max_entries must be >= 1")
        self.max_entries = max_entries
        self.enabled = enabled
        self._entries: OrderedDict[ShapeSignature, CachedBcm] = OrderedDict()
        self._lock = threading.Lock()
        self._stats = CacheStats()

    def __len__(self) -> int:
        return len(self._entries)

    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(self._stats.assemblies, self._stats.hits, self._stats.misses)

    def reset_stats(self) -> None:
        with self._lock:
            self._stats = CacheStats()

    def get_or_compute(self, mesh: BoundaryMesh, basis_policy: int = 0, **bcm_kwargs) -> Bcm:
        """Matrix for `mesh`, rescaled from the stored shape-class
        representative on a hit, assembled and stored on a miss.  Node
        metadata always comes from the query mesh."""
        normalized, scale, _ = normalize(mesh)
        if not self.enabled:
            with self._lock:
                self._stats.misses += 1
                self._stats.assemblies += 1
            reference = compute_bcm(normalized, basis_policy, normalized=True, **bcm_kwargs)
            return self._rescale(CachedBcm(1.0, reference), scale, mesh)

        sig = mesh_signature(mesh, basis_policy)
        with self._lock:
            entry = self._entries.get(sig)
            if entry is not None:
                self._entries.move_to_end(sig)
                self._stats.hits += 1
            else:
                self._stats.misses += 1
                self._stats.assemblies += 1
        if entry is None:
            # normalized=True here is a near-no-op renormalization; it routes
            # through the symmetric-degeneracy retry of compute_bcm.
            reference = compute_bcm(normalized, basis_policy, normalized=True, **bcm_kwargs)
            candidate = CachedBcm(1.0, reference)
            with self._lock:
                entry = self._entries.setdefault(sig, candidate)
                self._entries.move_to_end(sig)
                while len(self._entries) > self.max_entries:
                    self._entries.popitem(last=False)
        return self._rescale(entry, scale, mesh)

    @staticmethod
    def _rescale(entry: CachedBcm, mesh_scale: float, mesh: BoundaryMesh) -> Bcm:
        scaled = scale_bcm(entry.bcm, mesh_scale / entry.reference_scale)
        return replace(
            scaled,
            node_points=mesh.field_points(),
            node_element_lengths=mesh.field_node_weights(),
        )

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Write entries as portable JSON: one record per shape class with
        the signature, reference scale and the stored matrix payload."""
        with self._lock:
            records = [
                {
                    "signature": {
                        "coords": list(sig.quantized_coords),
                        "structure": [list(s) for s in sig.structure],
                        "policy": sig.basis_policy_id,
                    },
                    "reference_scale": entry.reference_scale,
                    "matrix": entry.bcm.matrix.tolist(),
                    "node_points": entry.bcm.node_points.tolist(),
                    "node_lengths": entry.bcm.node_element_lengths.tolist(),
                    "cond_estimate_G": entry.bcm.cond_estimate_G,
                }
                for sig, entry in self._entries.items()
            ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"format": "trefcap-bcm-cache", "version": 1, "entries": records}, fh)

    @classmethod
    def load(cls, path, max_entries: int = 4096) -> "BcmCache":
        """Load a cache written by save(); stored matrices are validated
        (square, size-consistent, zero row sums within tolerance)."""
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "trefcap-bcm-cache" or payload.get("version") != 1:
            raise CacheFileError(f"{path}: not a recognized cache file")
        cache = cls(max_entries=max_entries)
        for rec in payload["entries"]:
            try:
                sig = ShapeSignature(
                    quantized_coords=tuple(int(v) for v in rec["signature"]["coords"]),
                    structure=tuple(tuple(s) for s in rec["signature"]["structure"]),
                    basis_policy_id=int(rec["signature"]["policy"]),
                )
                matrix = np.array(rec["matrix"], dtype=float)
                points = np.array(rec["node_points"], dtype=float)
                lengths = np.array(rec["node_lengths"], dtype=float)
                ref_scale = float(rec["reference_scale"])
            except (KeyError, TypeError, ValueError) as exc:
                raise CacheFileError(f"{path}: malformed cache record: {exc}") from exc
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise CacheFileError(f"{path}: stored matrix is not square")
            if len(points) != matrix.shape[0] or len(lengths) != matrix.shape[0]:
                raise CacheFileError(f"{path}: node metadata size mismatch")
            if ref_scale <= 0:
                raise CacheFileError(f"{path}: non-positive reference scale")
            bcm = Bcm(
                matrix=matrix,
                node_points=points,
                node_element_lengths=lengths,
                basis_policy_id=sig.basis_policy_id,
                cond_estimate_G=float(rec.get("cond_estimate_G", float("nan"))),
            )
            if bcm.row_sum_defect() > _ROW_SUM_TOL:
                raise CacheFileError(
                    f"{path}: stored matrix violates the zero-row-sum identity "
                    f"(defect {bcm.row_sum_defect():.3e})"
                )
            cache._entries[sig] = CachedBcm(ref_scale, bcm)
        return cache
