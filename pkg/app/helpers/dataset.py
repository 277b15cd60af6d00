import io
import logging
import math
import re
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.models.dataset import (
    AttributeKind,
    AttributeSchema,
    BinaryView,
    Dataset,
    DatasetSummary,
    FoldPlan,
)
from app.utils.errors import ConfigError, DataError, ParseError
from app.utils.rng import make_rng
from app.utils.settings import DATA_DIR

logger = logging.getLogger(__name__)

Source = Union[BinaryIO, bytes, str]

MISSING_TOKEN = "?"
REST_LABEL = "rest"

# Published figures for the benchmark suite: instances, features, class
# values, imbalance ratio.
PUBLISHED_DATASETS: Dict[str, Tuple[int, int, int, float]] = {
    "pima": (768, 8, 2, 1.87),
    "dermatology": (366, 34, 6, 5.55),
    "segment0": (2308, 19, 2, 6.02),
    "led7digit": (443, 7, 2, 10.97),
    "abalone9-18": (731, 8, 2, 16.4),
    "yeast": (1484, 8, 10, 23.15),
    "poker-9_vs_7": (244, 10, 2, 29.5),
    "kddcup-guess_passwd_vs_satan": (1642, 41, 2, 29.98),
    "yeast5": (1484, 8, 2, 38.73),
    "ecoli": (336, 7, 8, 71.5),
    "abalone19": (4174, 8, 2, 129.44),
    "page-blocks": (548, 10, 5, 164.0),
    "shuttle": (2175, 9, 7, 853.0),
}

_ATTRIBUTE_RE = re.compile(r"^@attribute\s+('[^']+'|\"[^\"]+\"|[^\s{]+)\s*(.*)$", re.I)
_NUMERIC_TYPE_RE = re.compile(
    r"^(real|integer|numeric)\s*(?:\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\])?$", re.I
)


def _read_text(source: Source) -> str:
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _unquote(name: str) -> str:
    if len(name) >= 2 and name[0] == name[-1] and name[0] in "'\"":
        return name[1:-1]
    return name


def _split_list(text: str) -> List[str]:
    return [token.strip() for token in text.split(",") if token.strip()]


def _argument(line: str) -> str:
    parts = line.split(None, 1)
    return parts[1] if len(parts) > 1 else ""


def _build(name, attributes, classes, values, labels) -> Dataset:
    try:
        return Dataset(
            name=name,
            attributes=attributes,
            classes=classes,
            values=np.asarray(values, dtype=np.float64).reshape(len(labels), len(attributes)),
            labels=labels,
        )
    except ValidationError as e:
        raise DataError(f"invalid dataset {name!r}: {e}") from e


def _parse_attribute(line: str, line_no: int) -> AttributeSchema:
    match = _ATTRIBUTE_RE.match(line)
    if not match:
        raise ParseError(f"malformed attribute declaration: {line!r}", line_no)
    name, rest = _unquote(match.group(1)), match.group(2).strip()
    if rest.startswith("{"):
        if not rest.endswith("}"):
            raise ParseError(f"unterminated category list for {name!r}", line_no)
        categories = _split_list(rest[1:-1])
        if not categories:
            raise ParseError(f"attribute {name!r} declares no categories", line_no)
        if len(set(categories)) != len(categories):
            raise ParseError(f"attribute {name!r} repeats a category", line_no)
        return AttributeSchema(
            name=name, kind=AttributeKind.categorical, categories=categories
        )
    numeric = _NUMERIC_TYPE_RE.match(rest)
    if not numeric:
        raise ParseError(f"unknown attribute type {rest!r} for {name!r}", line_no)
    bounds = None
    if numeric.group(2) is not None:
        try:
            bounds = (float(numeric.group(2)), float(numeric.group(3)))
        except ValueError:
            raise ParseError(f"malformed range for {name!r}", line_no) from None
    return AttributeSchema(name=name, kind=AttributeKind.numeric, range=bounds)


def parse_keel(source: Source, name: Optional[str] = None) -> Dataset:
    """Parse a KEEL ``.dat`` file.

    The ``@outputs`` attribute (or the last declared attribute) becomes the
    label; ``@inputs``, when present, selects the feature attributes.
    """
    text = _read_text(source)
    relation = None
    declared: List[AttributeSchema] = []
    declared_lines: Dict[str, int] = {}
    inputs: Optional[List[str]] = None
    outputs: Optional[List[str]] = None
    data_start = None

    lines = text.splitlines()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        keyword = line.split(None, 1)[0].lower()
        if keyword == "@relation":
            parts = line.split(None, 1)
            relation = _unquote(parts[1].strip()) if len(parts) > 1 else ""
        elif keyword == "@attribute":
            attribute = _parse_attribute(line, line_no)
            if attribute.name in declared_lines:
                raise ParseError(f"duplicate attribute {attribute.name!r}", line_no)
            declared.append(attribute)
            declared_lines[attribute.name] = line_no
        elif keyword in ("@inputs", "@input"):
            inputs = [_unquote(name) for name in _split_list(_argument(line))]
        elif keyword in ("@outputs", "@output"):
            outputs = [_unquote(name) for name in _split_list(_argument(line))]
        elif keyword == "@data":
            data_start = line_no
            break
        else:
            raise ParseError(f"unexpected header line {line!r}", line_no)

    if data_start is None:
        raise ParseError("missing @data section")
    if len(declared) < 2:
        raise ParseError("need at least one feature and one class attribute")

    by_name = {attribute.name: position for position, attribute in enumerate(declared)}
    if outputs:
        if len(outputs) != 1:
            raise ParseError(f"exactly one output attribute is supported, got {outputs}")
        if outputs[0] not in by_name:
            raise ParseError(f"@outputs names unknown attribute {outputs[0]!r}")
        output_pos = by_name[outputs[0]]
    else:
        output_pos = len(declared) - 1
    output = declared[output_pos]
    if output.kind != AttributeKind.categorical:
        raise ParseError(
            f"class attribute {output.name!r} must be nominal",
            declared_lines[output.name],
        )

    if inputs:
        unknown = [item for item in inputs if item not in by_name]
        if unknown:
            raise ParseError(f"@inputs names unknown attributes {unknown}")
        chosen = set(inputs)
        feature_pos = [
            pos for pos, attribute in enumerate(declared)
            if attribute.name in chosen and pos != output_pos
        ]
    else:
        feature_pos = [pos for pos in range(len(declared)) if pos != output_pos]
    features = [declared[pos] for pos in feature_pos]

    category_index = [
        {category: i for i, category in enumerate(attribute.categories)}
        for attribute in declared
    ]
    rows: List[List[float]] = []
    labels: List[int] = []
    out_of_range = [0] * len(features)

    for line_no in range(data_start + 1, len(lines) + 1):
        line = lines[line_no - 1].strip()
        if not line or line.startswith("%"):
            continue
        tokens = [token.strip() for token in line.split(",")]
        if len(tokens) != len(declared):
            raise ParseError(
                f"expected {len(declared)} values, got {len(tokens)}", line_no
            )
        if any(token in (MISSING_TOKEN, "") for token in tokens):
            raise ParseError("missing values are not supported", line_no)
        label = category_index[output_pos].get(tokens[output_pos])
        if label is None:
            raise ParseError(
                f"unknown class {tokens[output_pos]!r} for {output.name!r}", line_no
            )
        row = []
        for i, pos in enumerate(feature_pos):
            attribute, token = declared[pos], tokens[pos]
            if attribute.kind == AttributeKind.categorical:
                code = category_index[pos].get(token)
                if code is None:
                    raise ParseError(
                        f"unknown category {token!r} for {attribute.name!r}", line_no
                    )
                row.append(float(code))
            else:
                try:
                    value = float(token)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {token!r} for {attribute.name!r}", line_no
                    ) from None
                if attribute.range and not attribute.range[0] <= value <= attribute.range[1]:
                    out_of_range[i] += 1
                row.append(value)
        rows.append(row)
        labels.append(label)

    for attribute, count in zip(features, out_of_range):
        if count:
            logger.warning(
                "%d values of %r fall outside the declared range %s",
                count, attribute.name, attribute.range,
            )

    return _build(
        name or relation or "dataset", features, list(output.categories), rows, labels
    )


def _format_number(value: float) -> str:
    return repr(float(value))


def write_keel(ds: Dataset, class_name: str = "Class") -> str:
    """Serialise a dataset back to KEEL text; ``parse_keel`` reads it back unchanged."""
    names = {attribute.name for attribute in ds.attributes}
    while class_name in names:
        class_name = f"{class_name}_"

    def quote(text: str) -> str:
        return f"'{text}'" if re.search(r"[\s{},]", text) else text

    out = [f"@relation {quote(ds.name)}"]
    for attribute in ds.attributes:
        if attribute.kind == AttributeKind.categorical:
            out.append(f"@attribute {quote(attribute.name)} {{{', '.join(attribute.categories)}}}")
        elif attribute.range is not None:
            lo, hi = attribute.range
            out.append(
                f"@attribute {quote(attribute.name)} real "
                f"[{_format_number(lo)}, {_format_number(hi)}]"
            )
        else:
            out.append(f"@attribute {quote(attribute.name)} real")
    out.append(f"@attribute {class_name} {{{', '.join(ds.classes)}}}")
    out.append(f"@inputs {', '.join(quote(a.name) for a in ds.attributes)}")
    out.append(f"@outputs {class_name}")
    out.append("@data")
    for row, label in zip(ds.values, ds.labels):
        cells = []
        for attribute, value in zip(ds.attributes, row):
            if attribute.kind == AttributeKind.categorical:
                cells.append(attribute.categories[int(value)])
            else:
                cells.append(_format_number(value))
        cells.append(ds.classes[int(label)])
        out.append(", ".join(cells))
    return "\n".join(out) + "\n"


def _is_number(token: str) -> bool:
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def parse_delimited(
    source: Source,
    delimiter: str = ",",
    label_column: Union[int, str] = "last",
    name: str = "dataset",
) -> Dataset:
    """Parse a rectangular delimited table.

    Columns holding any non-numeric token become categorical (categories in
    order of first appearance). The first row is taken as a header when all
    of its tokens are non-numeric and some column is numeric below it.
    """
    text = _read_text(source)
    if not text.strip():
        raise ParseError("empty input")
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            sep=delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=True,
            engine="python",
        )
    except pd.errors.EmptyDataError:
        raise ParseError("empty input") from None
    except pd.errors.ParserError as e:
        raise ParseError(f"ragged rows: {e}") from e

    ragged = frame.isna().any(axis=1)
    if ragged.any():
        raise ParseError("ragged rows: row is shorter than the first row", int(ragged.idxmax()) + 1)
    table = [[cell.strip() for cell in row] for row in frame.itertuples(index=False)]

    header = None
    first, body = table[0], table[1:]
    if body and not any(_is_number(token) for token in first):
        numeric_below = any(
            all(_is_number(row[j]) for row in body) for j in range(len(first))
        )
        if numeric_below:
            header, table = first, body

    width = len(table[0])
    if width < 2:
        raise ParseError("need at least one feature column and one label column")
    label_pos = width - 1 if label_column == "last" else int(label_column)
    if not -width <= label_pos < width:
        raise ConfigError(f"label column {label_column} outside 0..{width - 1}")
    label_pos %= width

    names = header or [f"x{j}" for j in range(width)]
    if header is None:
        names[label_pos] = "class"

    attributes: List[AttributeSchema] = []
    columns: List[List[float]] = []
    for j in range(width):
        if j == label_pos:
            continue
        tokens = [row[j] for row in table]
        if all(_is_number(token) for token in tokens):
            attributes.append(AttributeSchema(name=names[j], kind=AttributeKind.numeric))
            columns.append([float(token) for token in tokens])
        else:
            categories = list(dict.fromkeys(tokens))
            index = {category: i for i, category in enumerate(categories)}
            attributes.append(
                AttributeSchema(
                    name=names[j], kind=AttributeKind.categorical, categories=categories
                )
            )
            columns.append([float(index[token]) for token in tokens])

    label_tokens = [row[label_pos] for row in table]
    classes = list(dict.fromkeys(label_tokens))
    class_index = {label: i for i, label in enumerate(classes)}
    values = np.column_stack(columns) if columns else np.empty((len(table), 0))
    return _build(name, attributes, classes, values, [class_index[t] for t in label_tokens])


def parse_file(
    content: bytes,
    filename: str,
    delimiter: Optional[str] = None,
    label_column: Union[int, str] = "last",
) -> Dataset:
    """Parse file content, choosing KEEL or delimited by the file extension."""
    path = Path(filename)
    if path.suffix.lower() == ".dat":
        ds = parse_keel(content, name=path.stem)
    else:
        raw = content.decode("utf-8-sig")
        if delimiter is None:
            first_line = raw.splitlines()[0] if raw.strip() else ""
            delimiter = max([",", ";", "\t"], key=first_line.count)
        ds = parse_delimited(raw, delimiter, label_column, name=path.stem)
    if ds.num_present_classes < 2:
        raise DataError(f"{path.name} holds a single class")
    return ds


def load_dataset(
    path: str, delimiter: Optional[str] = None, label_column: Union[int, str] = "last"
) -> Dataset:
    """Load a dataset by path, or by bare name from the data directory."""
    resolved = Path(path)
    if not resolved.exists() and not resolved.suffix:
        resolved = Path(DATA_DIR) / f"{path}.dat"
    if not resolved.exists():
        raise DataError(f"dataset file not found: {path}")
    try:
        content = resolved.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    return parse_file(content, resolved.name, delimiter, label_column)


def subset(ds: Dataset, indices: Sequence[int]) -> Dataset:
    indices = np.asarray(indices, dtype=np.int64)
    return Dataset(
        name=ds.name,
        attributes=ds.attributes,
        classes=ds.classes,
        values=ds.values[indices],
        labels=ds.labels[indices],
        provenance=indices,
    )


def summarize(ds: Dataset) -> DatasetSummary:
    counts = np.bincount(ds.labels, minlength=len(ds.classes))
    class_counts = {
        label: int(count) for label, count in zip(ds.classes, counts) if count > 0
    }
    present = counts[counts > 0]
    return DatasetSummary(
        name=ds.name,
        num_instances=ds.num_instances,
        num_features=ds.num_features,
        class_counts=class_counts,
        imbalance_ratio=float(present.max() / present.min()),
    )


def binarize(ds: Dataset, positive_label: Optional[str] = None) -> BinaryView:
    """Split instances into the positive (minority) class and the rest."""
    counts = np.bincount(ds.labels, minlength=len(ds.classes))
    if positive_label is None:
        present = np.flatnonzero(counts > 0)
        # argmin keeps the first-declared label on ties
        positive_code = int(present[np.argmin(counts[present])])
    else:
        if positive_label not in ds.classes:
            raise DataError(f"positive label {positive_label!r} is not a class of {ds.name!r}")
        positive_code = ds.class_code(positive_label)
        if counts[positive_code] == 0:
            raise DataError(f"positive label {positive_label!r} has no instances")
    if counts[positive_code] == ds.num_instances:
        raise DataError(f"{ds.classes[positive_code]!r} is the only label present")

    minority = np.flatnonzero(ds.labels == positive_code)
    majority = np.flatnonzero(ds.labels != positive_code)
    warning = len(minority) > len(majority)
    if warning:
        logger.warning(
            "positive label %r has %d instances against %d for the rest",
            ds.classes[positive_code], len(minority), len(majority),
        )
    return BinaryView(
        base=ds,
        positive_label=ds.classes[positive_code],
        majority_indices=majority,
        minority_indices=minority,
        warning=warning,
    )


def negative_label(view: BinaryView) -> str:
    present = [
        label for code, label in enumerate(view.base.classes)
        if label != view.positive_label and np.any(view.base.labels == code)
    ]
    if len(present) == 1:
        return present[0]
    return REST_LABEL if view.positive_label != REST_LABEL else f"not_{REST_LABEL}"


def binary_dataset(view: BinaryView) -> Dataset:
    """Relabel the view's base as a two-class dataset (positive vs rest)."""
    ds = view.base
    negative = negative_label(view)
    if len(ds.classes) == 2:
        classes = list(ds.classes)
    else:
        classes = [view.positive_label, negative]
    positive_code = classes.index(view.positive_label)
    labels = np.full(ds.num_instances, 1 - positive_code, dtype=np.int64)
    labels[view.minority_indices] = positive_code
    return Dataset(
        name=ds.name,
        attributes=ds.attributes,
        classes=classes,
        values=ds.values,
        labels=labels,
        provenance=ds.provenance,
    )


def stratified_folds(ds: Dataset, num_folds: int, seed: int) -> FoldPlan:
    """Stratified fold assignment.

    Classes are visited in declaration order; each class is shuffled from the
    same seeded stream and dealt round-robin, continuing the fold counter
    from the previous class so fold sizes stay balanced.
    """
    if num_folds < 2:
        raise ConfigError("num_folds must be >= 2")
    if num_folds > ds.num_instances:
        raise ConfigError(
            f"num_folds ({num_folds}) exceeds the number of instances ({ds.num_instances})"
        )
    rng = make_rng(seed)
    assignment = np.empty(ds.num_instances, dtype=np.int64)
    counter = 0
    for code in range(len(ds.classes)):
        members = np.flatnonzero(ds.labels == code)
        if members.size == 0:
            continue
        shuffled = rng.permutation(members)
        assignment[shuffled] = (counter + np.arange(shuffled.size)) % num_folds
        counter += shuffled.size
    return FoldPlan(num_folds=num_folds, fold_assignment=assignment, seed=seed)
