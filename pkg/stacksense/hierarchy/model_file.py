"""
Model files: one header line followed by the model as canonical JSON::

    stacksense-model 1 sha256=<hex digest of the body>
    {"family": ..., "labels": ..., ...}

Keys are sorted and floats written in their shortest round-trip form, so the same
model always produces the same bytes.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, Union

from stacksense.exceptions import ChecksumError, ModelFileError, SchemaMismatch
from stacksense.hierarchy import HierarchicalModel


logger = logging.getLogger(__name__)

MAGIC = "stacksense-model"
FORMAT = 1


def dumps_model(model: HierarchicalModel) -> str:
    body = json.dumps(model.serialize(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode()).hexdigest()
    return f"{MAGIC} {FORMAT} sha256={digest}\n{body}\n"


def loads_model(text: str, schema_version: Optional[str] = None) -> HierarchicalModel:
    """
    Raises:
        ModelFileError: not a model file or an unsupported format
        ChecksumError: the body doesn't match the header's digest, i.e., the file
            was truncated or edited
        SchemaMismatch: ``schema_version`` is given and differs from the model's
    """
    header, sep, body = text.partition("\n")
    parts = header.split()
    if not sep or len(parts) != 3 or parts[0] != MAGIC or not parts[2].startswith("sha256="):
        raise ModelFileError("not a stacksense model file")
    if parts[1] != str(FORMAT):
        raise ModelFileError(f"unsupported model format {parts[1]}, expected {FORMAT}")
    body = body.rstrip("\n")
    if hashlib.sha256(body.encode()).hexdigest() != parts[2][len("sha256="):]:
        raise ChecksumError("model file checksum doesn't match its content")
    try:
        model = HierarchicalModel.from_dict(json.loads(body))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"invalid model content: {e}") from e
    if schema_version is not None and model.schema_version != schema_version:
        raise SchemaMismatch(schema_version, model.schema_version)
    return model


def save_model(model: HierarchicalModel, filepath: Union[str, Path]) -> None:
    Path(filepath).write_bytes(dumps_model(model).encode("utf-8"))
    logger.info("model saved to %s", filepath)


def load_model(
    filepath: Union[str, Path], schema_version: Optional[str] = None
) -> HierarchicalModel:
    try:
        text = Path(filepath).read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelFileError(f"{filepath}: not a stacksense model file") from e
    return loads_model(text, schema_version)
