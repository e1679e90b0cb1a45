"""Self-describing checkpoint container, text (canonical) or binary.

Text layout: a first line `gbrbm-checkpoint <version>` followed by
`key=value` lines; parameter arrays are flat space-separated decimals
(row-major, visible index major for the weights) produced by Python's
shortest round-tripping float repr, so save -> load -> save is
byte-identical.

The binary variant starts with a 16-byte magic and stores the same fields
little-endian with float64 arrays.  `load_checkpoint` detects the variant
from the leading bytes.

Random state is recorded as the run seed plus the epoch/update counters:
training derives all of its streams from (seed, epoch, batch index), so a
resumed run continues exactly as the original would have.  Persistent PCD
chains are not checkpointed; after a resume they are re-seeded from the
first mini-batch.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import RbmParams
from .sampling import RngStream
from .training import TrainConfig, TrainState

FORMAT_VERSION = 1
TEXT_HEADER = "gbrbm-checkpoint"
BINARY_MAGIC = b"GBRBM\x00CKPT\x00BIN\x01\x00"
assert len(BINARY_MAGIC) == 16

_ARRAY_KEYS = ("weights", "vbias", "hbias", "log_var")
_CONFIG_FIELDS = [f.name for f in dataclasses.fields(TrainConfig)]


@dataclasses.dataclass(frozen=True)
class Checkpoint:
    """A saved training state: parameters, config echo, and counters."""

    params: RbmParams
    config: TrainConfig
    epoch: int
    update_count: int
    format_version: int = FORMAT_VERSION

    def to_state(self) -> TrainState:
        return TrainState(params=self.params, rng=RngStream(self.config.seed),
                          epoch=self.epoch, update_count=self.update_count)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_array(arr: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(arr))


def _config_items(config: TrainConfig) -> list[tuple[str, str]]:
    return [(name, _fmt_value(getattr(config, name))) for name in _CONFIG_FIELDS]


def _parse_config(fields: dict) -> TrainConfig:
    return TrainConfig(
        algorithm=str(fields["algorithm"]),
        eta=float(fields["eta"]),
        batch_size=int(fields["batch_size"]),
        epochs=int(fields["epochs"]),
        seed=int(fields["seed"]),
        k=int(fields["k"]),
        d=int(fields["d"]),
        k_prime=int(fields["k_prime"]),
        learn_variance=bool(int(fields["learn_variance"])),
        variance_lr_scale=float(fields["variance_lr_scale"]),
    )


def save_checkpoint(path, state: TrainState, config: TrainConfig, binary: bool = False) -> None:
    ckpt = Checkpoint(params=state.params, config=config,
                      epoch=state.epoch, update_count=state.update_count)
    if binary:
        Path(path).write_bytes(_to_binary(ckpt))
    else:
        Path(path).write_text(_to_text(ckpt))


def _to_text(ckpt: Checkpoint) -> str:
    p = ckpt.params
    m, n = p.weights.shape
    lines = [f"{TEXT_HEADER} {ckpt.format_version}"]
    lines.append(f"m={m}")
    lines.append(f"n={n}")
    lines.append(f"epoch={ckpt.epoch}")
    lines.append(f"update_count={ckpt.update_count}")
    for key, value in _config_items(ckpt.config):
        lines.append(f"config.{key}={value}")
    for key in _ARRAY_KEYS:
        lines.append(f"{key}={_fmt_array(getattr(p, key))}")
    return "\n".join(lines) + "\n"


def _to_binary(ckpt: Checkpoint) -> bytes:
    p = ckpt.params
    m, n = p.weights.shape
    config_blob = json.dumps(dict(_config_items(ckpt.config)), sort_keys=True).encode()
    head = struct.pack("<IIIQQI", ckpt.format_version, m, n,
                       ckpt.epoch, ckpt.update_count, len(config_blob))
    body = b"".join(np.ascontiguousarray(getattr(p, key), dtype="<f8").tobytes()
                    for key in _ARRAY_KEYS)
    return BINARY_MAGIC + head + config_blob + body


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw.startswith(BINARY_MAGIC):
        return _from_binary(raw, path)
    try:
        text = raw.decode()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: neither text nor binary checkpoint") from exc
    if not text.startswith(TEXT_HEADER + " "):
        raise FormatError(f"{path}: missing '{TEXT_HEADER}' header line")
    return _from_text(text, path)


def _from_text(text: str, path) -> Checkpoint:
    lines = text.splitlines()
    version = int(lines[0].split()[1])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    fields = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"{path}: malformed line {i} (expected key=value)")
        key, value = line.split("=", 1)
        fields[key.strip()] = value
    try:
        m, n = int(fields["m"]), int(fields["n"])
        config = _parse_config({k[len("config."):]: v for k, v in fields.items()
                                if k.startswith("config.")})
        arrays = {key: np.fromiter((float(t) for t in fields[key].split()), dtype=np.float64)
                  for key in _ARRAY_KEYS}
        params = RbmParams(weights=arrays["weights"].reshape(m, n), vbias=arrays["vbias"],
                           hbias=arrays["hbias"], log_var=arrays["log_var"])
        return Checkpoint(params=params, config=config, epoch=int(fields["epoch"]),
                          update_count=int(fields["update_count"]), format_version=version)
    except KeyError as exc:
        raise FormatError(f"{path}: missing checkpoint field {exc}") from None


def _from_binary(raw: bytes, path) -> Checkpoint:
    off = len(BINARY_MAGIC)
    head_size = struct.calcsize("<IIIQQI")
    if len(raw) < off + head_size:
        raise FormatError(f"{path}: truncated binary checkpoint header")
    version, m, n, epoch, update_count, blob_len = struct.unpack_from("<IIIQQI", raw, off)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off += head_size
    config = _parse_config(json.loads(raw[off:off + blob_len].decode()))
    off += blob_len
    sizes = {"weights": m * n, "vbias": m, "hbias": n, "log_var": m}
    expected = off + 8 * sum(sizes.values())
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    arrays = {}
    for key in _ARRAY_KEYS:
        count = sizes[key]
        arrays[key] = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
    params = RbmParams(weights=arrays["weights"].reshape(m, n), vbias=arrays["vbias"],
                       hbias=arrays["hbias"], log_var=arrays["log_var"])
    return Checkpoint(params=params, config=config, epoch=epoch,
                      update_count=update_count, format_version=version)
