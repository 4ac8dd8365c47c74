from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Slot:
    name: str
    shape: tuple
    offset: int

    @property
    def size(self):
        return int(np.prod(self.shape, dtype=np.int64))


class ParamStore:
    """Flat float64 parameter vector with named, shaped views.

    Slots are laid out back to back in insertion order, so they are disjoint
    and cover the whole array.  ``data`` may be a view into a larger buffer,
    which is how a model shares one flat vector across its body networks.
    """

    def __init__(self, shapes, data=None):
        slots = []
        offset = 0
        for name, shape in shapes:
            shape = tuple(int(s) for s in shape)
            slot = Slot(name, shape, offset)
            slots.append(slot)
            offset += slot.size
        self._slots = {s.name: s for s in slots}
        if len(self._slots) != len(slots):
            raise ValueError("duplicate parameter names")
        if data is None:
            data = np.zeros(offset)
        if data.shape != (offset,) or data.dtype != np.float64:
            raise ValueError(f"expected float64 buffer of length {offset}, got {data.dtype} {data.shape}")
        self.data = data

    @property
    def size(self):
        return self.data.shape[0]

    @property
    def slots(self):
        return list(self._slots.values())

    def names(self):
        return list(self._slots)

    def slice_of(self, name):
        s = self._slots[name]
        return slice(s.offset, s.offset + s.size)

    def __getitem__(self, name):
        s = self._slots[name]
        return self.data[s.offset : s.offset + s.size].reshape(s.shape)

    def __setitem__(self, name, value):
        self[name][...] = value

    def items(self):
        return [(name, self[name]) for name in self._slots]

    def rebind(self, data):
        """Point the store at another buffer with the same layout."""
        if data.shape != self.data.shape:
            raise ValueError("buffer length mismatch")
        self.data = data
