"""
Checkpoint Persistence for arsrank

File layout:

    b"ARSCKPT1"                      8-byte magic (format version 1)
    uint64 little-endian             length of the metadata block
    metadata                         canonical JSON (sorted keys, no spaces)
    tensor payload                   float64 little-endian, row-major, in
                                     manifest order

The metadata holds the tensor manifest (name, shape, offset, nbytes), the
TrainConfig echo, AdamW hyperparameters and step count, the epoch/step
counters, the RNG position and the per-epoch history, plus a SHA-256
checksum over magic + metadata-without-checksum + payload. Nothing time-
or host-dependent is stored, so saving the same state twice gives the same
bytes.

Usage:
    from src.training.checkpoint import save_checkpoint, load_checkpoint

    save_checkpoint(ckpt, "checkpoints/last.ckpt")
    model = load_checkpoint("checkpoints/last.ckpt").to_model()
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from src.model.ars_head import ArsParams
from src.model.encoder import ToyEncoder, ToyEncoderParams
from src.model.losses import Temperature
from src.model.relevance_model import RelevanceModel, build_encoder
from src.training.optimizer import AdamWState
from src.utils.config import TrainConfig
from src.utils.errors import ChecksumMismatch, ConfigError, ShapeMismatch, VersionMismatch
from src.utils.logger import setup_logger

logger = setup_logger("Checkpoint")

MAGIC = b"ARSCKPT1"
MAGIC_PREFIX = b"ARSCKPT"
FORMAT_VERSION = 1
_LEN = struct.Struct("<Q")


@dataclass
class Checkpoint:
    config: TrainConfig
    parameters: dict            # name -> np.ndarray
    optimizer: AdamWState
    step: int = 0
    epoch: int = 0              # completed epochs
    history: list = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @property
    def rng_state(self) -> dict:
        # every random stream is derived from (seed, stream name, epoch)
        return {"seed": self.config.seed, "next_epoch": self.epoch}

    @classmethod
    def capture(cls, model: RelevanceModel, config: TrainConfig, state: AdamWState,
                step: int, epoch: int, history: list) -> "Checkpoint":
        return cls(
            config=config,
            parameters={name: value.copy() for name, value in model.named_parameters().items()},
            optimizer=AdamWState(
                lr0=state.lr0, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
                weight_decay=state.weight_decay, no_decay=state.no_decay, t=state.t,
                m={k: v.copy() for k, v in state.m.items()},
                v={k: v.copy() for k, v in state.v.items()},
            ),
            step=step,
            epoch=epoch,
            history=[dict(row) for row in history],
        )

    def to_model(self) -> RelevanceModel:
        """Rebuilds a RelevanceModel (re-loading the embedding store if precomputed)."""
        p = self.parameters
        ars = ArsParams(W_q=p["ars.W_q"].copy(), W_c=p["ars.W_c"].copy(), w_att=p["ars.w_att"].copy())
        temperature = Temperature(log_tau=p["loss.log_tau"].copy())
        if self.config.backend == "toy":
            encoder = ToyEncoder(ToyEncoderParams(table=p["encoder.table"].copy()))
        else:
            encoder = build_encoder(self.config)
        return RelevanceModel(ars, temperature, encoder)


def expected_shapes(config: TrainConfig) -> dict[str, tuple]:
    h, d = config.hidden_dim, config.embed_dim
    shapes = {"ars.W_q": (h, d), "ars.W_c": (h, d), "ars.w_att": (h,), "loss.log_tau": ()}
    if config.backend == "toy":
        shapes["encoder.table"] = (config.vocab_size, d)
    return shapes


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False).encode("utf-8")


def _checksum(metadata_without_checksum: dict, payload: bytes) -> str:
    digest = hashlib.sha256()
    digest.update(MAGIC)
    digest.update(_canonical(metadata_without_checksum))
    digest.update(payload)
    return digest.hexdigest()


def _tensor_list(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    tensors = [(name, ckpt.parameters[name]) for name in sorted(ckpt.parameters)]
    for name in sorted(ckpt.optimizer.m):
        tensors.append((f"adamw.m.{name}", ckpt.optimizer.m[name]))
    for name in sorted(ckpt.optimizer.v):
        tensors.append((f"adamw.v.{name}", ckpt.optimizer.v[name]))
    return tensors


def save_checkpoint(ckpt: Checkpoint, path: str) -> str:
    """Writes ``ckpt`` atomically (temp file + rename); returns the checksum."""
    manifest = []
    chunks = []
    offset = 0
    for name, tensor in _tensor_list(ckpt):
        data = np.ascontiguousarray(tensor, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(tensor.shape), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    metadata = {
        "format_version": ckpt.format_version,
        "tensors": manifest,
        "config": ckpt.config.to_dict(),
        "optimizer": {**ckpt.optimizer.hyperparameters(), "t": ckpt.optimizer.t},
        "step": ckpt.step,
        "epoch": ckpt.epoch,
        "rng_state": ckpt.rng_state,
        "history": ckpt.history,
    }
    checksum = _checksum(metadata, payload)
    header = _canonical({**metadata, "checksum": checksum})

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(MAGIC)
        f.write(_LEN.pack(len(header)))
        f.write(header)
        f.write(payload)
    os.replace(tmp_path, path)

    logger.info(f"[CHECKPOINT_SAVE] {path} | step={ckpt.step} epoch={ckpt.epoch} sha256={checksum[:12]}")
    return checksum


def load_checkpoint(path: str) -> Checkpoint:
    """
    Reads and verifies a checkpoint.

    Raises:
        ConfigError: the file does not exist.
        VersionMismatch: unknown magic version or format_version.
        ChecksumMismatch: corrupted or truncated file.
        ShapeMismatch: tensors inconsistent with the echoed config.
    """
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        blob = f.read()

    if blob[:len(MAGIC_PREFIX)] != MAGIC_PREFIX:
        raise ChecksumMismatch(f"{path} is not an arsrank checkpoint (bad magic)")
    if blob[:len(MAGIC)] != MAGIC:
        raise VersionMismatch(f"{path} has format {blob[:len(MAGIC)]!r}, expected {MAGIC!r}")
    if len(blob) < len(MAGIC) + _LEN.size:
        raise ChecksumMismatch(f"{path} is truncated")

    (header_len,) = _LEN.unpack_from(blob, len(MAGIC))
    header_start = len(MAGIC) + _LEN.size
    header_end = header_start + header_len
    if header_end > len(blob):
        raise ChecksumMismatch(f"{path} is truncated (metadata block)")
    try:
        metadata = json.loads(blob[header_start:header_end].decode("utf-8"))
        stored_checksum = metadata.pop("checksum")
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, AttributeError) as e:
        raise ChecksumMismatch(f"{path}: metadata block is unreadable ({e})") from e

    payload = blob[header_end:]
    if _checksum(metadata, payload) != stored_checksum:
        raise ChecksumMismatch(f"{path}: checksum mismatch, file is corrupted")
    if metadata.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format_version {metadata.get('format_version')} is not {FORMAT_VERSION}")

    tensors: dict[str, np.ndarray] = {}
    for entry in metadata["tensors"]:
        shape = tuple(entry["shape"])
        start, nbytes = entry["offset"], entry["nbytes"]
        if nbytes != 8 * int(np.prod(shape, dtype=np.int64)) or start + nbytes > len(payload):
            raise ShapeMismatch(f"tensor '{entry['name']}' manifest is inconsistent with its shape {shape}")
        array = np.frombuffer(payload, dtype="<f8", count=nbytes // 8, offset=start)
        tensors[entry["name"]] = array.reshape(shape).astype(np.float64)

    config = TrainConfig.from_dict(metadata["config"])
    shapes = expected_shapes(config)
    parameters = {}
    for name, shape in shapes.items():
        if name not in tensors:
            raise ShapeMismatch(f"checkpoint lacks parameter '{name}'")
        if tensors[name].shape != shape:
            raise ShapeMismatch(f"parameter '{name}' has shape {tensors[name].shape}, config implies {shape}")
        parameters[name] = tensors[name]

    opt_meta = metadata["optimizer"]
    state = AdamWState(
        lr0=opt_meta["lr0"], beta1=opt_meta["beta1"], beta2=opt_meta["beta2"], eps=opt_meta["eps"],
        weight_decay=opt_meta["weight_decay"], no_decay=frozenset(opt_meta["no_decay"]), t=opt_meta["t"],
    )
    for name, tensor in tensors.items():
        for prefix, target in (("adamw.m.", state.m), ("adamw.v.", state.v)):
            if name.startswith(prefix):
                param = name[len(prefix):]
                if param not in shapes or tensor.shape != shapes[param]:
                    raise ShapeMismatch(f"optimizer moment '{name}' does not match any parameter")
                target[param] = tensor

    logger.info(f"[CHECKPOINT_LOAD] {path} | step={metadata['step']} epoch={metadata['epoch']}")
    return Checkpoint(
        config=config,
        parameters=parameters,
        optimizer=state,
        step=metadata["step"],
        epoch=metadata["epoch"],
        history=metadata["history"],
        format_version=metadata["format_version"],
    )
