"""On-disk cache of spectrum tables, one ``.npz`` file per (model, N, observables)."""

from __future__ import annotations

import hashlib
import json
import logging
import zipfile
from pathlib import Path
from typing import Mapping

import numpy as np
from filelock import FileLock

from .pauli_algebra import LocalOperator
from .spectra import HamiltonianSpec, SpectrumTable, eev_table

log = logging.getLogger(__name__)


def _operator_fingerprint(op: LocalOperator) -> list:
    return [[str(p), c.real, c.imag] for c, p in op.simplified().terms]


def cache_key(model_bytes: bytes, n_sites: int, observables: Mapping[str, LocalOperator], normalize: bool) -> str:
    digest = hashlib.sha256(model_bytes)
    extra = {
        "N": n_sites,
        "normalize": normalize,
        "observables": {name: _operator_fingerprint(op) for name, op in sorted(observables.items())},
    }
    digest.update(json.dumps(extra, sort_keys=True).encode())
    return digest.hexdigest()[:32]


class SpectrumCache:
    """Cache directory owned by a single process at a time (advisory lock file)."""

    def __init__(self, directory: str | Path | None, enabled: bool = True):
        self.directory = Path(directory) if directory else None
        self.enabled = enabled and self.directory is not None
        self.hits = 0
        self.misses = 0
        if self.enabled:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._lock = FileLock(str(self.directory / ".lock"))
        else:
            self._lock = None

    def path_for(self, key: str) -> Path:
        return self.directory / f"spectrum_{key}.npz"

    def _load(self, path: Path, n_sites: int, names) -> SpectrumTable | None:
        try:
            with np.load(path) as data:
                eev = {name: data[f"eev::{name}"] for name in names}
                return SpectrumTable(n_sites, data["energies"], data["momenta"], eev)
        except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
            log.warning("cache entry %s is unreadable (%s); recomputing", path.name, exc)
            return None

    def _store(self, path: Path, table: SpectrumTable) -> None:
        arrays = {"energies": table.energies, "momenta": table.momenta}
        arrays.update({f"eev::{name}": v for name, v in table.eev.items()})
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **arrays)
        tmp.replace(path)

    def table(
        self,
        h: LocalOperator,
        n_sites: int,
        observables: Mapping[str, LocalOperator],
        model_bytes: bytes,
        normalize: bool = False,
        max_sites: int | None = None,
    ) -> SpectrumTable:
        spec_kwargs = {} if max_sites is None else {"max_sites": max_sites}
        spec = HamiltonianSpec(h, n_sites, **spec_kwargs)
        if not self.enabled:
            self.misses += 1
            return eev_table(spec, observables)
        key = cache_key(model_bytes, n_sites, observables, normalize)
        path = self.path_for(key)
        with self._lock:
            if path.exists():
                table = self._load(path, n_sites, observables)
                if table is not None:
                    self.hits += 1
                    return table
            self.misses += 1
            table = eev_table(spec, observables)
            self._store(path, table)
            return table
