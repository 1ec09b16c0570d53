"""
Shot datasets and their on-disk formats.

This module provides:
- ShotDataset, the S x N table of per-qubit outcome indices
- ShotFileManager: shot-file writing/parsing and duals-file persistence
- File information helpers used when reporting written artifacts

Shot file layout (UTF-8, LF line endings)::

    #format=1
    #povm=pauli6
    #n_qubits=2
    #n_shots=3
    #seed=7
    #generator=philox4x64/seedseq/block4096
    #state=zero
    05
    12
    40
"""

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DatasetError, FrameError
from .frames import ProductDualSet, QubitDualParams, povm_from_label, select_minimal_basis
from .logger import get_logger, get_logger_instance

SHOT_FORMAT_VERSION = 1
DUALS_FORMAT_VERSION = 1
REQUIRED_HEADER_KEYS = ("format", "povm", "n_qubits", "n_shots", "seed", "generator", "state")


@dataclass(frozen=True, eq=False)
class ShotDataset:
    """
    Measured outcomes, one index in 0..r-1 per qubit per shot.

    Attributes:
        outcomes (np.ndarray): S x N uint8 array
        povm_label (str): Label of the per-qubit POVM
        seed (int | None): Sampling seed, when known
        generator (str): Identifier of the random generator used
        state (str): State provenance string
    """

    outcomes: np.ndarray
    povm_label: str = "pauli6"
    seed: Optional[int] = None
    generator: str = ""
    state: str = ""
    r: int = field(default=6)

    def __post_init__(self):
        raw = np.asarray(self.outcomes)
        if raw.ndim != 2 or raw.shape[1] < 1:
            raise DatasetError(f"outcomes must be an S x N array, got {raw.shape}")
        if raw.shape[0] < 1:
            raise DatasetError("a shot dataset needs at least one shot")
        if raw.dtype.kind not in "iu":
            raise DatasetError(f"outcome indices must be integers, got dtype {raw.dtype}")
        low, high = int(raw.min()), int(raw.max())
        if low < 0 or high >= self.r:
            bad = low if low < 0 else high
            raise DatasetError(f"outcome index {bad} outside 0..{self.r - 1}")
        outcomes = raw.astype(np.uint8)
        outcomes.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def n_shots(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.outcomes.shape[1]

    def subset(self, indices: Sequence[int]) -> "ShotDataset":
        """Dataset restricted to the given shot indices, in that order."""
        return ShotDataset(
            self.outcomes[np.asarray(indices, dtype=np.intp)],
            self.povm_label,
            self.seed,
            self.generator,
            self.state,
            self.r,
        )

    def header(self) -> Dict[str, str]:
        return {
            "format": str(SHOT_FORMAT_VERSION),
            "povm": self.povm_label,
            "n_qubits": str(self.n_qubits),
            "n_shots": str(self.n_shots),
            "seed": "" if self.seed is None else str(self.seed),
            "generator": self.generator,
            "state": self.state,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShotDataset):
            return NotImplemented
        return self.header() == other.header() and np.array_equal(
            self.outcomes, other.outcomes
        )

    __hash__ = None


class ShotFileManager:
    """
    Reads and writes shot files and duals files.

    Attributes:
        logger: Module logger used for error and info messages.
    """

    def __init__(self):
        self.logger = get_logger(__name__)

    def encode(self, dataset: ShotDataset) -> bytes:
        """
        Serialize a dataset to the shot-file byte layout.

        Args:
            dataset (ShotDataset): Dataset to encode.

        Returns:
            bytes: Header lines followed by one digit row per shot.
        """
        if dataset.r > 10:
            raise DatasetError("shot files store one digit per outcome (r <= 10)")
        header = "".join(f"#{k}={v}\n" for k, v in dataset.header().items())
        body = np.empty((dataset.n_shots, dataset.n_qubits + 1), dtype=np.uint8)
        body[:, :-1] = dataset.outcomes + ord("0")
        body[:, -1] = ord("\n")
        return header.encode("utf-8") + body.tobytes()

    def write_shot_file(self, path: str, dataset: ShotDataset) -> str:
        """
        Write a dataset to disk, creating parent directories.

        Args:
            path (str): Destination path.
            dataset (ShotDataset): Dataset to write.

        Returns:
            str: The path written.
        """
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        payload = self.encode(dataset)
        with open(path, "wb") as f:
            f.write(payload)
        get_logger_instance().log_file_operation(
            "write", path, f"{dataset.n_shots} shots, {self.format_file_size(len(payload))}"
        )
        return path

    def decode(self, payload: bytes) -> ShotDataset:
        """
        Parse shot-file bytes.

        Raises:
            DatasetError: On malformed headers, bad digits or count mismatch;
                the message names the offending line.
        """
        lines = payload.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()

        header: Dict[str, str] = {}
        n_header = 0
        for n_header, raw in enumerate(lines):
            if not raw.startswith(b"#"):
                break
            text = raw[1:].decode("utf-8", errors="replace")
            if "=" not in text:
                raise DatasetError(f"header line without '=': {text!r}", line=n_header + 1)
            key, value = text.split("=", 1)
            header[key.strip()] = value.strip()
        else:
            n_header = len(lines)

        missing = [k for k in REQUIRED_HEADER_KEYS if k not in header]
        if missing:
            raise DatasetError(f"shot file header misses {', '.join(missing)}")
        if header["format"] != str(SHOT_FORMAT_VERSION):
            raise DatasetError(f"unsupported shot-file format {header['format']}")
        try:
            povm = povm_from_label(header["povm"])
        except FrameError as e:
            raise DatasetError(str(e))
        try:
            n_qubits = int(header["n_qubits"])
            n_shots = int(header["n_shots"])
            seed = int(header["seed"]) if header["seed"] else None
        except ValueError as e:
            raise DatasetError(f"unparseable header value: {e}")
        if n_shots < 1 or n_qubits < 1:
            raise DatasetError("shot file must declare n_shots >= 1 and n_qubits >= 1")

        body = lines[n_header:]
        if len(body) != n_shots:
            raise DatasetError(
                f"header declares {n_shots} shots but the body has {len(body)} lines",
                line=n_header + min(len(body), n_shots) + 1,
            )
        lengths = np.fromiter((len(raw) for raw in body), dtype=np.intp, count=len(body))
        bad_rows = np.flatnonzero(lengths != n_qubits)
        if bad_rows.size == 0:
            digits = np.frombuffer(b"".join(body), dtype=np.uint8).reshape(n_shots, n_qubits)
            digits = digits.astype(np.int16) - ord("0")
            bad_rows = np.flatnonzero(np.any((digits < 0) | (digits >= povm.r), axis=1))
        if bad_rows.size:
            offset = int(bad_rows[0])
            raise DatasetError(
                f"expected {n_qubits} digits in 0..{povm.r - 1}, got {body[offset]!r}",
                line=n_header + offset + 1,
            )
        outcomes = digits.astype(np.uint8)
        return ShotDataset(
            outcomes, header["povm"], seed, header["generator"], header["state"], povm.r
        )

    def read_shot_file(self, path: str) -> ShotDataset:
        """
        Load and validate a shot file.

        Args:
            path (str): Path to the shot file.

        Returns:
            ShotDataset: Parsed dataset.
        """
        if not os.path.isfile(path):
            raise DatasetError(f"shot file not found: {path}")
        with open(path, "rb") as f:
            dataset = self.decode(f.read())
        self.logger.info(
            f"Loaded {dataset.n_shots} shots on {dataset.n_qubits} qubits from {path}"
        )
        return dataset

    def save_duals(self, path: str, duals: ProductDualSet, extra: Optional[dict] = None):
        """
        Persist the free parameters of a ProductDualSet as JSON.

        Args:
            path (str): Destination path.
            duals (ProductDualSet): Duals to store.
            extra (dict, optional): Additional metadata stored under "meta".
        """
        document = {
            "schema_version": DUALS_FORMAT_VERSION,
            "qubits": [
                {
                    "povm": entry.selection.povm.label,
                    "basis_indices": list(entry.selection.basis_indices),
                    "theta": entry.params.theta.tolist(),
                }
                for entry in duals.per_qubit
            ],
            "meta": extra or {},
        }
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(document, f, indent=2, sort_keys=True)
            f.write("\n")
        get_logger_instance().log_file_operation("write", path, "duals")

    def load_duals(self, path: str) -> ProductDualSet:
        """
        Load duals written by save_duals.

        Raises:
            DatasetError: If the file is malformed or uses another basis choice.
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DatasetError(f"cannot read duals file {path}: {e}")
        if document.get("schema_version") != DUALS_FORMAT_VERSION:
            raise DatasetError(f"unsupported duals schema in {path}")

        selections: List = []
        params: List[QubitDualParams] = []
        cache = {}
        for q, item in enumerate(document.get("qubits", [])):
            label = item.get("povm", "pauli6")
            if label not in cache:
                cache[label] = select_minimal_basis(povm_from_label(label))
            selection = cache[label]
            if list(selection.basis_indices) != item.get("basis_indices"):
                raise DatasetError(f"qubit {q}: basis indices do not match '{label}'")
            try:
                params.append(QubitDualParams(item["theta"]))
            except (KeyError, FrameError) as e:
                raise DatasetError(f"qubit {q}: bad theta ({e})")
            selections.append(selection)
        if not selections:
            raise DatasetError(f"duals file {path} lists no qubits")
        return ProductDualSet.from_params(selections, params)

    def get_file_info(self, file_path: str) -> Dict[str, object]:
        """
        Get basic information about a written artifact.

        Args:
            file_path (str): Path to the file.

        Returns:
            dict: name, path, size (bytes) and modified (POSIX timestamp).
        """
        stat = os.stat(file_path)
        return {
            "name": os.path.basename(file_path),
            "path": file_path,
            "size": stat.st_size,
            "modified": stat.st_mtime,
        }

    def format_file_size(self, size_bytes: int) -> str:
        """
        Format file size for human-readable display.

        Args:
            size_bytes (int): File size in bytes.

        Returns:
            str: Formatted file size string using binary units (e.g., "1.5 MB").
        """
        if size_bytes == 0:
            return "0 B"

        size_names = ["B", "KB", "MB", "GB", "TB"]
        i = 0
        while size_bytes >= 1024 and i < len(size_names) - 1:
            size_bytes /= 1024.0
            i += 1

        return f"{size_bytes:.1f} {size_names[i]}"
