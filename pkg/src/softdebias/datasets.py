"""Record types and file importers for the evaluation datasets.

* StereoSet-style: normalized JSON lines ``{"context", "stereo", "anti",
  "category"}`` or the public StereoSet json (``{"data": {"intrasentence":
  [...], "intersentence": [...]}}``).
* CrowS-Pairs csv with columns sent_more, sent_less, stereo_antistereo, bias_type.
* Labeled corpus: tab-separated ``text<TAB>label`` with a header row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

CROWS_LABELS = ("stereo", "antistereo")


@dataclass(frozen=True)
class StereoExample:
    context: str
    stereo_sentence: str
    anti_sentence: str
    category: str = ""

    def __post_init__(self):
        for name in ("context", "stereo_sentence", "anti_sentence"):
            if not getattr(self, name).strip():
                raise DataError(f"stereo example has empty {name}")

    def swapped(self) -> "StereoExample":
        return StereoExample(self.context, self.anti_sentence, self.stereo_sentence, self.category)


@dataclass(frozen=True)
class CrowsPair:
    sent_more: str
    sent_less: str
    stereo_antistereo: str
    bias_type: str = ""

    def __post_init__(self):
        if self.stereo_antistereo not in CROWS_LABELS:
            raise DataError(f"invalid CrowS label {self.stereo_antistereo!r}")
        if self.sent_more == self.sent_less:
            raise DataError(f"CrowS pair has identical sentences: {self.sent_more!r}")

    def swapped(self) -> "CrowsPair":
        return CrowsPair(self.sent_less, self.sent_more, self.stereo_antistereo, self.bias_type)


@dataclass(frozen=True)
class LabeledCorpus:
    records: tuple
    name: str = ""

    def __post_init__(self):
        records = tuple((str(t), int(y)) for t, y in self.records)
        labels = {y for _, y in records}
        if not labels <= {0, 1}:
            raise DataError(f"labels must be 0 or 1, got {sorted(labels)}")
        if labels != {0, 1}:
            raise DataError("corpus needs both labels present")
        if any(not t.strip() for t, _ in records):
            raise DataError("corpus contains an empty text")
        object.__setattr__(self, "records", records)


def _public_stereoset(data: dict) -> list:
    out = []
    for section in ("intrasentence", "intersentence"):
        for item in data.get(section, []):
            by_label = {s["gold_label"]: s["sentence"] for s in item["sentences"]}
            if "stereotype" not in by_label or "anti-stereotype" not in by_label:
                raise DataError(f"StereoSet item {item.get('id', '?')} lacks a stereotype/anti-stereotype sentence")
            out.append(StereoExample(item["context"], by_label["stereotype"], by_label["anti-stereotype"], item.get("bias_type", "")))
    return out


def load_stereoset(path) -> list:
    text = Path(path).read_text(encoding="utf-8")
    try:
        whole = json.loads(text)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict) and "data" in whole:
        return _public_stereoset(whole["data"])
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(StereoExample(rec["context"], rec["stereo"], rec["anti"], rec.get("category", "")))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: bad StereoSet record ({exc})") from None
    return out


def save_stereoset(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            rec = {"context": ex.context, "stereo": ex.stereo_sentence, "anti": ex.anti_sentence, "category": ex.category}
            fh.write(json.dumps(rec) + "\n")


def load_crows(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"sent_more", "sent_less", "stereo_antistereo", "bias_type"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise DataError(f"{path}: CrowS file needs columns {sorted(needed)}")
        return [CrowsPair(r["sent_more"], r["sent_less"], r["stereo_antistereo"], r["bias_type"]) for r in reader]


def save_crows(pairs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sent_more", "sent_less", "stereo_antistereo", "bias_type"])
        for p in pairs:
            writer.writerow([p.sent_more, p.sent_less, p.stereo_antistereo, p.bias_type])


def load_corpus(path) -> LabeledCorpus:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty corpus file")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected text<TAB>label")
            try:
                records.append((row[0], int(row[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {row[1]!r} is not an integer") from None
    return LabeledCorpus(tuple(records), Path(path).name)


def save_corpus(corpus: LabeledCorpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sentence\tlabel\n")
        for text, label in corpus.records:
            fh.write(f"{text}\t{label}\n")
