"""Per-utterance speaker embeddings, PCA reduction and MDS diagnostics.

A pretrained speaker-recognition network is out of scope; identity vectors
either arrive via the binary store or come from ``toy_speaker_encoder``,
which hashes mel-band statistics through a fixed random projection. The
interface contract is only that an utterance maps deterministically to a
1024-dim vector in which same-speaker recordings are close.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .dsp import SpectrogramConfig, Waveform, mel_spectrogram
from .errors import ConfigError, FileFormatError, ShapeError

RAW_EMBEDDING_DIM = 1024
_PROJECTION_SEED = 0x5EE7ED
_ENCODER_MELS = 48


@dataclass(frozen=True)
class SpeakerEmbedding:
    utterance_id: str
    vector: np.ndarray


# -- toy encoder ----------------------------------------------------------

def _band_statistics(w: Waveform) -> np.ndarray:
    cfg = SpectrogramConfig(n_mels=_ENCODER_MELS)
    m = mel_spectrogram(w, cfg).values            # [bands x frames]
    mean = m.mean(axis=1)
    std = m.std(axis=1)
    delta = np.abs(np.diff(m, axis=1)).mean(axis=1) if m.shape[1] > 1 \
        else np.zeros(m.shape[0])
    feats = np.concatenate([mean, std, delta])
    feats = feats - feats.mean()
    scale = feats.std()
    return feats / scale if scale > 0 else feats


_PROJECTION: np.ndarray | None = None


def _projection() -> np.ndarray:
    global _PROJECTION
    if _PROJECTION is None:
        rng = np.random.default_rng(_PROJECTION_SEED)
        _PROJECTION = rng.standard_normal((RAW_EMBEDDING_DIM,
                                           3 * _ENCODER_MELS))
        _PROJECTION /= np.sqrt(3 * _ENCODER_MELS)
    return _PROJECTION


def toy_speaker_encoder(w: Waveform,
                        utterance_id: str = "") -> SpeakerEmbedding:
    vector = _projection() @ _band_statistics(w)
    return SpeakerEmbedding(utterance_id=utterance_id, vector=vector)


# -- PCA -------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray          # [d]
    components: np.ndarray    # [k x d], orthonormal rows
    eigenvalues: np.ndarray   # [k], non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]


def pca_fit(vectors: np.ndarray, k: int) -> PcaModel:
    """Top-k principal axes of mean-centered data by eigenvalue.

    Eigenvalues are sample variances (ddof=1) of the data along each
    component. The largest-magnitude entry of every component is made
    positive so fits are sign-deterministic.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("pca_fit expects an [n x d] matrix")
    n, d = x.shape
    if n < 2:
        raise ConfigError("pca_fit needs at least two vectors")
    if k > min(n - 1, d):
        raise ConfigError(f"k={k} exceeds min(n-1, d)="
                          f"{min(n - 1, d)} for n={n}, d={d}")
    mean = x.mean(axis=0)
    centered = x - mean
    if not centered.any():
        raise ConfigError("pca_fit got identical vectors; no variance to fit")
    # SVD of the centered data is better conditioned than eig(covariance)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = (s * s) / (n - 1)
    components = vt[:k]
    flips = np.sign(components[np.arange(k),
                               np.abs(components).argmax(axis=1)])
    components = components * flips[:, None]
    return PcaModel(mean=mean, components=components,
                    eigenvalues=eigenvalues[:k])


def pca_project(model: PcaModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.input_dim:
        raise ShapeError(f"vector dim {v.shape[-1]} != model dim "
                         f"{model.input_dim}")
    return (v - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, proj: np.ndarray) -> np.ndarray:
    return proj @ model.components + model.mean


# -- classical MDS ----------------------------------------------------------

def mds_embed(distances: np.ndarray, out_dim: int = 2) -> np.ndarray:
    """Double-centering + top eigenpairs; exact for genuinely low-rank
    configurations."""
    dmat = np.asarray(distances, dtype=np.float64)
    n = dmat.shape[0]
    if dmat.shape != (n, n):
        raise ShapeError("distance matrix must be square")
    if not np.allclose(dmat, dmat.T, atol=1e-10):
        raise ConfigError("distance matrix must be symmetric")
    if not np.allclose(np.diag(dmat), 0.0, atol=1e-10):
        raise ConfigError("distance matrix must have a zero diagonal")
    if (dmat < -1e-12).any():
        raise ConfigError("distances must be non-negative")

    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (dmat * dmat) @ j
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    coords = np.zeros((n, out_dim))
    for i in range(min(out_dim, n)):
        if evals[i] > 0:
            coords[:, i] = evecs[:, i] * np.sqrt(evals[i])
    return coords


def pairwise_distances(vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    d = np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(d, 0.0)
    return (d + d.T) / 2.0


def write_mds_csv(path, ids, speakers, coords):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "speaker", "x", "y"])
        for sid, spk, (x, y) in zip(ids, speakers, coords):
            writer.writerow([sid, spk, f"{x:.10g}", f"{y:.10g}"])


# -- embedding store ----------------------------------------------------------

_STORE_MAGIC = b"SERLEMB1"


class EmbeddingStore:
    """In-memory id -> vector map with one dimension for all records."""

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._records: dict[str, np.ndarray] = {}

    def __len__(self):
        return len(self._records)

    def __contains__(self, utterance_id: str):
        return utterance_id in self._records

    def ids(self) -> list[str]:
        return list(self._records)

    def add(self, emb: SpeakerEmbedding):
        vec = np.asarray(emb.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ShapeError("embedding vectors must be one-dimensional")
        if not np.isfinite(vec).all():
            raise ConfigError(f"embedding '{emb.utterance_id}' has "
                              f"non-finite entries")
        if self.dim is None:
            self.dim = len(vec)
        elif len(vec) != self.dim:
            raise ConfigError(f"embedding '{emb.utterance_id}' has dim "
                              f"{len(vec)}, store has {self.dim}")
        self._records[emb.utterance_id] = vec

    def get(self, utterance_id: str) -> np.ndarray:
        return self._records[utterance_id]

    def matrix(self, ids) -> np.ndarray:
        return np.stack([self._records[i] for i in ids])


def embedding_store_save(path, store: EmbeddingStore):
    with open(path, "wb") as f:
        f.write(_STORE_MAGIC)
        f.write(struct.pack("<II", len(store), store.dim or 0))
        for sid in store.ids():
            vec = np.ascontiguousarray(store.get(sid), dtype="<f8")
            sid_b = sid.encode()
            f.write(struct.pack("<H", len(sid_b)))
            f.write(sid_b)
            f.write(vec.tobytes())


def embedding_store_load(path) -> EmbeddingStore:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != _STORE_MAGIC:
        raise FileFormatError(f"{path}: not an embedding store")
    count, dim = struct.unpack_from("<II", blob, 8)
    store = EmbeddingStore(dim=dim if count else None)
    off = 16
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, off)
            off += 2
            sid = blob[off:off + nlen].decode()
            off += nlen
            vec = np.frombuffer(blob, dtype="<f8", count=dim, offset=off)
            off += 8 * dim
            store.add(SpeakerEmbedding(utterance_id=sid,
                                       vector=vec.astype(np.float64)))
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FileFormatError(f"{path}: truncated embedding store "
                              f"({exc})") from exc
    if off != len(blob):
        raise FileFormatError(f"{path}: {len(blob) - off} trailing bytes")
    return store
