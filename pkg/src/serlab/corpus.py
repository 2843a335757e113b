"""Corpus manifests, label schemes, class balancing and protocol splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ManifestError

CANONICAL_EMOTIONS = ("Anger", "Boredom", "Disgust", "Excitement", "Fear",
                      "Happiness", "Neutral", "Sadness", "Surprise")

_MANIFEST_COLUMNS = ("id", "audio_path", "emotion", "speaker_id", "corpus_id")

EXCLUDED = "Excluded"


@dataclass(frozen=True)
class Sample:
    id: str
    audio_path: str
    emotion: str
    speaker_id: str
    corpus_id: str
    augmented_from: str | None = None


class SchemeName(str, Enum):
    FOUR_CLASS = "FourClass"
    THREE_CLASS = "ThreeClass"


@dataclass(frozen=True)
class LabelScheme:
    name: SchemeName
    class_names: tuple[str, ...]
    mapping: dict[str, str]     # canonical emotion -> class name or Excluded

    def class_index(self, emotion: str) -> int | None:
        target = self.mapping[emotion]
        if target == EXCLUDED:
            return None
        return self.class_names.index(target)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def four_class_scheme() -> LabelScheme:
    keep = {"Anger", "Happiness", "Sadness", "Neutral"}
    mapping = {e: (e if e in keep else EXCLUDED) for e in CANONICAL_EMOTIONS}
    return LabelScheme(name=SchemeName.FOUR_CLASS,
                       class_names=("Anger", "Happiness", "Sadness",
                                    "Neutral"),
                       mapping=mapping)


def three_class_scheme() -> LabelScheme:
    negative = {"Anger", "Boredom", "Disgust", "Fear", "Sadness"}
    positive = {"Excitement", "Happiness", "Surprise"}
    mapping = {}
    for e in CANONICAL_EMOTIONS:
        if e in negative:
            mapping[e] = "Negative"
        elif e in positive:
            mapping[e] = "Positive"
        else:
            mapping[e] = "Neutral"
    return LabelScheme(name=SchemeName.THREE_CLASS,
                       class_names=("Negative", "Positive", "Neutral"),
                       mapping=mapping)


def scheme_by_name(name: str) -> LabelScheme:
    if name == SchemeName.FOUR_CLASS.value:
        return four_class_scheme()
    if name == SchemeName.THREE_CLASS.value:
        return three_class_scheme()
    raise ConfigError(f"unknown label scheme '{name}'")


@dataclass
class LabeledDataset:
    """Samples surviving a label scheme, with parallel class indices."""

    samples: list[Sample]
    class_indices: list[int]
    class_names: tuple[str, ...]

    def class_of(self) -> dict[str, int]:
        return {s.id: c for s, c in zip(self.samples, self.class_indices)}


# -- manifests ---------------------------------------------------------------

def load_manifest(path) -> list[Sample]:
    """Read and validate a manifest CSV.

    Relative audio paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    samples: list[Sample] = []
    seen: set[str] = set()
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in _MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ManifestError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            sid = (row.get("id") or "").strip()
            if not sid:
                raise ManifestError(f"{path}:{lineno}: empty id")
            if sid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id '{sid}'")
            emotion = (row.get("emotion") or "").strip()
            if emotion not in CANONICAL_EMOTIONS:
                raise ManifestError(
                    f"{path}:{lineno}: unknown emotion label '{emotion}' "
                    f"(expected one of {', '.join(CANONICAL_EMOTIONS)})")
            audio = (row.get("audio_path") or "").strip()
            if audio and not Path(audio).is_absolute():
                audio = str(base / audio)
            aug = (row.get("augmented_from") or "").strip() or None
            samples.append(Sample(id=sid, audio_path=audio, emotion=emotion,
                                  speaker_id=row["speaker_id"].strip(),
                                  corpus_id=row["corpus_id"].strip(),
                                  augmented_from=aug))
            seen.add(sid)
    for s in samples:
        if s.augmented_from is not None and s.augmented_from not in seen:
            raise ManifestError(f"{path}: sample '{s.id}' references missing "
                                f"source '{s.augmented_from}'")
    return samples


def save_manifest(path, samples: Sequence[Sample]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_MANIFEST_COLUMNS + ("augmented_from",))
        for s in samples:
            writer.writerow([s.id, s.audio_path, s.emotion, s.speaker_id,
                             s.corpus_id, s.augmented_from or ""])


# -- label schemes -----------------------------------------------------------

def apply_label_scheme(samples: Sequence[Sample],
                       scheme: LabelScheme) -> LabeledDataset:
    kept: list[Sample] = []
    indices: list[int] = []
    for s in samples:
        idx = scheme.class_index(s.emotion)
        if idx is None:
            continue
        kept.append(s)
        indices.append(idx)
    return LabeledDataset(samples=kept, class_indices=indices,
                          class_names=scheme.class_names)


def class_counts(ds: LabeledDataset) -> dict[str, int]:
    counts = {name: 0 for name in ds.class_names}
    for idx in ds.class_indices:
        counts[ds.class_names[idx]] += 1
    return counts


# -- balancing ---------------------------------------------------------------

def _group_by_class(samples: Sequence[Sample],
                    class_of: Callable[[Sample], str]) -> dict[str, list[Sample]]:
    groups: dict[str, list[Sample]] = {}
    for s in samples:
        groups.setdefault(class_of(s), []).append(s)
    return groups


def balance_undersample(samples: Sequence[Sample], seed: int,
                        class_of: Callable[[Sample], str] | None = None
                        ) -> list[Sample]:
    """Randomly drop majority-class samples until all classes match the
    minority count. Original order is preserved."""
    class_of = class_of or (lambda s: s.emotion)
    groups = _group_by_class(samples, class_of)
    if not groups or any(len(g) == 0 for g in groups.values()):
        raise ConfigError("balance_undersample needs at least one sample "
                          "per class")
    floor = min(len(g) for g in groups.values())
    rng = np.random.default_rng(seed)
    keep: set[str] = set()
    for name in sorted(groups):
        members = groups[name]
        chosen = rng.choice(len(members), size=floor, replace=False)
        keep.update(members[i].id for i in chosen)
    return [s for s in samples if s.id in keep]


def balance_augment(samples: Sequence[Sample],
                    augment_fn: Callable[[Sample, int], Sample],
                    seed: int,
                    class_of: Callable[[Sample], str] | None = None
                    ) -> list[Sample]:
    """Add synthetic samples until every class reaches the majority count.

    All originals are retained. Source samples are cycled round-robin from
    a seeded starting order, so no source is reused before every other
    member of its class has produced a variant. ``augment_fn(source, k)``
    must return a new Sample whose ``augmented_from`` is the source id.
    """
    class_of = class_of or (lambda s: s.emotion)
    groups = _group_by_class(samples, class_of)
    if not groups:
        raise ConfigError("balance_augment got an empty sample list")
    ceiling = max(len(g) for g in groups.values())
    rng = np.random.default_rng(seed)
    out = list(samples)
    per_source_counter: dict[str, int] = {}
    for name in sorted(groups):
        members = groups[name]
        deficit = ceiling - len(members)
        order = rng.permutation(len(members))
        for j in range(deficit):
            source = members[order[j % len(members)]]
            k = per_source_counter.get(source.id, 0) + 1
            per_source_counter[source.id] = k
            synthetic = augment_fn(source, k)
            if synthetic.augmented_from != source.id:
                raise ConfigError(
                    f"augment_fn returned augmented_from="
                    f"{synthetic.augmented_from!r} for source '{source.id}'")
            if class_of(synthetic) != name:
                raise ConfigError(f"augmented copy of '{source.id}' changed "
                                  f"class")
            out.append(synthetic)
    return out


def default_augment_fn(source: Sample, k: int) -> Sample:
    """Metadata-only variant construction (audio rendering is the caller's
    concern, keyed by the synthetic id)."""
    return replace(source, id=f"{source.id}.aug{k}", augmented_from=source.id)


# -- protocol splits ----------------------------------------------------------

class Protocol(str, Enum):
    CROSS_CORPUS = "CrossCorpus"
    LOSO = "LOSO"


@dataclass
class SplitPlan:
    train: list[str]
    val: list[str]
    test: list[str]
    protocol: Protocol
    fold_name: str = ""

    def __post_init__(self):
        tr, va, te = set(self.train), set(self.val), set(self.test)
        if tr & va or tr & te or va & te:
            raise ConfigError("split sets must be pairwise disjoint")


def split_cross_corpus(samples: Sequence[Sample],
                       train_corpora: Sequence[str],
                       val_corpora: Sequence[str],
                       test_corpus: str) -> SplitPlan:
    train_set = set(train_corpora)
    val_set = set(val_corpora)
    test_set = {test_corpus}
    if train_set & val_set or train_set & test_set or val_set & test_set:
        raise ConfigError("train/val/test corpus sets overlap")
    present = {s.corpus_id for s in samples}
    unknown = (train_set | val_set | test_set) - present
    if unknown:
        raise ConfigError(f"corpora not present in the data: "
                          f"{sorted(unknown)}")
    train = [s.id for s in samples if s.corpus_id in train_set]
    val = [s.id for s in samples if s.corpus_id in val_set]
    test = [s.id for s in samples if s.corpus_id in test_set]
    return SplitPlan(train=train, val=val, test=test,
                     protocol=Protocol.CROSS_CORPUS,
                     fold_name=f"test={test_corpus}")


def split_loso(samples: Sequence[Sample]) -> list[SplitPlan]:
    """One fold per speaker: that speaker is the test set, the rest train."""
    speakers = sorted({s.speaker_id for s in samples})
    if len(speakers) < 2:
        raise ConfigError("leave-one-speaker-out needs at least 2 speakers")
    plans = []
    for spk in speakers:
        test = [s.id for s in samples if s.speaker_id == spk]
        train = [s.id for s in samples if s.speaker_id != spk]
        plans.append(SplitPlan(train=train, val=[], test=test,
                               protocol=Protocol.LOSO,
                               fold_name=f"speaker={spk}"))
    return plans
