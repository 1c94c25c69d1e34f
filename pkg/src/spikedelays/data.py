"""Dataset manifests and the deterministic batch iterator.

A manifest is a UTF-8 text file: a header line ``#classes=<K> channels=<C>``
followed by one ``relative/path<TAB>label`` line per sample. Paths are
resolved relative to the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingFile
from .events import SpikeTensor, bin_events, load_events


@dataclass
class DatasetManifest:
    entries: list[tuple[Path, int]]  # (absolute event-file path, label)
    num_classes: int
    channel_count: int

    def __post_init__(self):
        for path, label in self.entries:
            if not (0 <= label < self.num_classes):
                raise ValueError(f"label {label} out of range for {path}")

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path) -> DatasetManifest:
    """Parse a manifest file and check every referenced file exists."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#classes="):
        raise ValueError(f"{path}: missing '#classes=<K> channels=<C>' header")
    head = dict(kv.split("=") for kv in lines[0].lstrip("#").split())
    num_classes = int(head["classes"])
    channel_count = int(head["channels"])
    entries = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rel, label = line.rsplit("\t", 1)
        full = path.parent / rel
        if not full.is_file():
            raise MissingFile(f"{path}: referenced file missing: {full}")
        entries.append((full, int(label)))
    return DatasetManifest(entries, num_classes, channel_count)


def write_manifest(
    manifest_path, entries: list[tuple[str, int]], num_classes: int, channel_count: int
) -> None:
    """Write a manifest; ``entries`` hold paths relative to the manifest."""
    lines = [f"#classes={num_classes} channels={channel_count}"]
    lines += [f"{rel}\t{label}" for rel, label in entries]
    Path(manifest_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_sample(path, dt_ms: float, timesteps: int, binary: bool = False) -> SpikeTensor:
    try:
        stream = load_events(path)
    except OSError as exc:
        raise MissingFile(f"cannot read {path}: {exc}") from exc
    return bin_events(stream, dt_ms, timesteps, binary=binary)


class BatchIterator:
    """Serves binned, labelled minibatches with reproducible ordering.

    The order of samples in epoch ``e`` is a pure function of
    ``(seed, e)`` when shuffling, so two runs with the same seed visit
    identical batches and a resumed run can replay any epoch. The final
    partial batch of an epoch is emitted.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        batch_size: int,
        dt_ms: float,
        timesteps: int,
        shuffle: bool = False,
        seed: int = 0,
        binary: bool = False,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.manifest = manifest
        self.batch_size = batch_size
        self.dt_ms = dt_ms
        self.timesteps = timesteps
        self.shuffle = shuffle
        self.seed = seed
        self.binary = binary

    def batches_per_epoch(self) -> int:
        n = len(self.manifest)
        return (n + self.batch_size - 1) // self.batch_size

    def _epoch_order(self, epoch: int) -> np.ndarray:
        if not self.shuffle:
            return np.arange(len(self.manifest))
        rng = np.random.default_rng([self.seed, epoch])
        return rng.permutation(len(self.manifest))

    def epoch(self, epoch: int = 0):
        """Yield (values[B,C,T] int32, labels[B] int64) over one epoch."""
        order = self._epoch_order(epoch)
        for lo in range(0, len(order), self.batch_size):
            idx = order[lo : lo + self.batch_size]
            values = np.empty(
                (len(idx), self.manifest.channel_count, self.timesteps), dtype=np.int32
            )
            labels = np.empty(len(idx), dtype=np.int64)
            for row, i in enumerate(idx):
                path, label = self.manifest.entries[i]
                values[row] = load_sample(
                    path, self.dt_ms, self.timesteps, binary=self.binary
                ).values
                labels[row] = label
            yield values, labels

    def stream(self, start_epoch: int = 0):
        """Endless batch stream, crossing epoch boundaries transparently."""
        epoch = start_epoch
        while True:
            yield from self.epoch(epoch)
            epoch += 1


def batch_iterator(
    manifest: DatasetManifest,
    batch_size: int,
    shuffle: bool = False,
    seed: int = 0,
    *,
    dt_ms: float,
    timesteps: int,
    epochs: int = 1,
    binary: bool = False,
):
    """Generator over ``epochs`` epochs of (values, labels) batches."""
    it = BatchIterator(
        manifest, batch_size, dt_ms, timesteps,
        shuffle=shuffle, seed=seed, binary=binary,
    )
    for e in range(epochs):
        yield from it.epoch(e)
