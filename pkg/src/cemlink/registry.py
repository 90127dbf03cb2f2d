"""Dense, non-overlapping name registries for LP columns and rows.

Each entry owns a contiguous index block laid out row-major over its shape,
so a (family, entity) pair plus multi-dimensional labels addresses a single
LP column or row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RegistryError(Exception):
    pass


@dataclass(frozen=True)
class RegEntry:
    family: str
    entity: str
    start: int
    shape: tuple[int, ...]
    labels: tuple[str, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    @property
    def stop(self) -> int:
        return self.start + self.size


class Registry:
    def __init__(self, kind: str = "var"):
        self.kind = kind
        self.entries: list[RegEntry] = []
        self._by_key: dict[tuple[str, str], RegEntry] = {}
        self._total = 0

    def add(self, family: str, entity: str, shape: tuple[int, ...] = (),
            labels: tuple[str, ...] = ()) -> RegEntry:
        key = (family, entity)
        if key in self._by_key:
            raise RegistryError(f"duplicate {self.kind} entry {key}")
        if len(labels) != len(shape):
            raise RegistryError(f"{key}: {len(shape)} dims need {len(shape)} labels, got {len(labels)}")
        entry = RegEntry(family=family, entity=entity, start=self._total,
                         shape=tuple(int(s) for s in shape), labels=tuple(labels))
        self.entries.append(entry)
        self._by_key[key] = entry
        self._total = entry.stop
        return entry

    @property
    def total(self) -> int:
        return self._total

    def has(self, family: str, entity: str = "") -> bool:
        return (family, entity) in self._by_key

    def entry(self, family: str, entity: str = "") -> RegEntry:
        try:
            return self._by_key[(family, entity)]
        except KeyError:
            raise RegistryError(f"no {self.kind} entry ({family!r}, {entity!r})") from None

    def index(self, family: str, entity: str = "", *idx: int) -> int:
        e = self.entry(family, entity)
        if len(idx) != len(e.shape):
            raise RegistryError(f"({family}, {entity}) expects {len(e.shape)} indices")
        return e.start + int(np.ravel_multi_index(idx, e.shape)) if idx else e.start

    def block(self, family: str, entity: str = "") -> np.ndarray:
        """All indices of the entry, reshaped to the entry's shape."""
        e = self.entry(family, entity)
        return np.arange(e.start, e.stop).reshape(e.shape or (1,))

    def name_of(self, i: int) -> str:
        for e in self.entries:
            if e.start <= i < e.stop:
                if not e.shape:
                    return f"{e.family}.{e.entity}" if e.entity else e.family
                pos = np.unravel_index(i - e.start, e.shape)
                tail = ",".join(str(p) for p in pos)
                return f"{e.family}.{e.entity}[{tail}]" if e.entity else f"{e.family}[{tail}]"
        raise RegistryError(f"index {i} outside registry")

    def names(self) -> list[str]:
        out = []
        for e in self.entries:
            if not e.shape:
                out.append(f"{e.family}.{e.entity}" if e.entity else e.family)
                continue
            for flat in range(e.size):
                pos = np.unravel_index(flat, e.shape)
                tail = ",".join(str(p) for p in pos)
                out.append(f"{e.family}.{e.entity}[{tail}]" if e.entity else f"{e.family}[{tail}]")
        return out

    def check_covers(self, n: int) -> None:
        """Entries must tile [0, n) exactly, in order, without gaps or overlap."""
        at = 0
        for e in self.entries:
            if e.start != at:
                raise RegistryError(f"gap or overlap at index {at} before {e.family}")
            at = e.stop
        if at != n:
            raise RegistryError(f"registry covers {at} of {n} indices")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "entries": [
                {"family": e.family, "entity": e.entity, "start": e.start,
                 "shape": list(e.shape), "labels": list(e.labels)}
                for e in self.entries
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "Registry":
        reg = Registry(doc.get("kind", "var"))
        for ent in doc["entries"]:
            got = reg.add(ent["family"], ent["entity"], tuple(ent["shape"]), tuple(ent["labels"]))
            if got.start != ent["start"]:
                raise RegistryError("serialized registry is not dense")
        return reg
