import csv
import json
import logging
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from pydantic import BaseModel

from app.config import settings
from app.errors import KeyFileError, ResultFileError
from app.engines.codec import deserialize, serialize
from app.engines.flat_tree import FlatTree
from app.engines.tree_model import DATA_SIZE, KEY_SIZE

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ArtifactStore:
    """
    Reads and writes the command-line artifacts:
    .bpt trees, .keys batches (raw 32-byte keys), .res results (raw u64 LE),
    JSON documents and CSV tables. Relative paths resolve against `base`.
    """

    def __init__(self, base: PathLike = None):
        self.base = Path(base if base is not None else settings.artifact_dir)

    def resolve(self, path: PathLike) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.base / path

    def _write_bytes(self, path: PathLike, payload: bytes) -> Path:
        full_path = self.resolve(path)
        full_path.parent.mkdir(parents=True, exist_ok=True)
        with open(full_path, "wb") as f:
            f.write(payload)
        return full_path

    def _read_bytes(self, path: PathLike) -> bytes:
        with open(self.resolve(path), "rb") as f:
            return f.read()

    # trees

    def write_tree(self, tree: FlatTree, path: PathLike) -> Path:
        full_path = self.resolve(path)
        full_path.parent.mkdir(parents=True, exist_ok=True)
        with open(full_path, "wb") as f:
            serialize(tree, f)
        logger.debug(f"wrote tree to {full_path}")
        return full_path

    def read_tree(self, path: PathLike) -> FlatTree:
        with open(self.resolve(path), "rb") as f:
            return deserialize(f)

    # key batches

    def write_keys(self, block: np.ndarray, path: PathLike) -> Path:
        block = np.ascontiguousarray(block, dtype=np.uint8).reshape(-1, KEY_SIZE)
        return self._write_bytes(path, block.tobytes())

    def read_keys(self, path: PathLike) -> np.ndarray:
        raw = self._read_bytes(path)
        if len(raw) == 0:
            raise KeyFileError(f"{path} holds no keys")
        if len(raw) % KEY_SIZE:
            raise KeyFileError(f"{path} is {len(raw)} bytes, not a whole number of {KEY_SIZE}-byte keys")
        return np.frombuffer(raw, dtype=np.uint8).reshape(-1, KEY_SIZE).copy()

    # results

    def write_results(self, results: np.ndarray, path: PathLike) -> Path:
        return self._write_bytes(path, np.asarray(results, dtype="<u8").tobytes())

    def read_results(self, path: PathLike) -> np.ndarray:
        raw = self._read_bytes(path)
        if len(raw) % DATA_SIZE:
            raise ResultFileError(f"{path} is {len(raw)} bytes, not a whole number of 8-byte results")
        return np.frombuffer(raw, dtype="<u8").astype(np.uint64)

    # reports

    def write_json(self, document: Union[BaseModel, dict, list], path: PathLike) -> Path:
        if isinstance(document, BaseModel):
            text = document.model_dump_json(indent=2)
        else:
            text = json.dumps(_plain(document), indent=2)
        return self._write_bytes(path, (text + "\n").encode("utf-8"))

    def write_csv(self, rows: Iterable[dict], path: PathLike) -> Path:
        rows = list(rows)
        full_path = self.resolve(path)
        full_path.parent.mkdir(parents=True, exist_ok=True)
        with open(full_path, "w", newline="", encoding="utf-8") as f:
            if rows:
                writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                writer.writerows(rows)
        return full_path

    def file_size(self, path: PathLike) -> int:
        return self.resolve(path).stat().st_size


def _plain(document):
    if isinstance(document, BaseModel):
        return document.model_dump(mode="json")
    if isinstance(document, dict):
        return {k: _plain(v) for k, v in document.items()}
    if isinstance(document, (list, tuple)):
        return [_plain(v) for v in document]
    return document


storage = ArtifactStore()
