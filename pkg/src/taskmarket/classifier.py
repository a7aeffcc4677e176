"""Two-stage job-title classification into five functional categories.

Titles are sent in batches to an external classifier that must answer with
one code (1-5) per title, separated by whitespace. A batch whose answer is
malformed in any way is discarded whole, and its titles go to a
deterministic keyword matcher instead.
"""

from __future__ import annotations

import enum
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .model import Occupation

log = logging.getLogger(__name__)

# reserved for a live client; read but never used or logged by the stub
ENDPOINT_ENV = "TASKMARKET_CLASSIFIER_ENDPOINT"
CREDENTIAL_ENV = "TASKMARKET_CLASSIFIER_KEY"


class Category(enum.IntEnum):
    MANAGEMENT = 1
    PROFESSIONAL = 2
    TECHNICAL = 3
    AUXILIARY = 4
    PHYSICAL = 5

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @property
    def occupation(self) -> Occupation:
        return _TO_OCCUPATION[self]

    @classmethod
    def from_occupation(cls, occ: Occupation) -> "Category":
        return {v: k for k, v in _TO_OCCUPATION.items()}[Occupation(occ)]


_TO_OCCUPATION = {
    Category.MANAGEMENT: Occupation.MGMT,
    Category.PROFESSIONAL: Occupation.PROF,
    Category.TECHNICAL: Occupation.TECH,
    Category.AUXILIARY: Occupation.AUX,
    Category.PHYSICAL: Occupation.PHYS,
}


class Method(str, enum.Enum):
    EXTERNAL = "external"
    KEYWORD = "keyword"
    UNRESOLVED = "unresolved"


# Seeded from the category exemplars used in the classification prompt and
# the occupation mapping table, plus close variants.
DEFAULT_LEXICON: dict[Category, tuple[str, ...]] = {
    Category.MANAGEMENT: (
        "ceo", "manager", "director", "head of", "chief", "president", "supervisor",
        "executive", "经理", "总监", "主管",
    ),
    Category.PROFESSIONAL: (
        "doctor", "lawyer", "accountant", "engineer", "lecturer", "professor", "physician",
        "analyst", "researcher", "architect", "auditor", "医生", "律师", "会计", "工程师",
    ),
    Category.TECHNICAL: (
        "programmer", "technician", "developer", "designer", "legal assistant", "operations",
        "maintenance", "程序员", "技术员", "开发",
    ),
    Category.AUXILIARY: (
        "assistant", "clerk", "secretary", "receptionist", "administrative", "data entry",
        "customer service", "助理", "文员", "秘书", "前台",
    ),
    Category.PHYSICAL: (
        "cleaner", "laborer", "labourer", "driver", "electrician", "warehouse", "worker",
        "operator", "assembler", "courier", "保洁", "清洁", "普工", "司机",
    ),
}


def normalize_title(title: str) -> str:
    return re.sub(r"\s+", " ", title.strip()).casefold()


@dataclass(frozen=True)
class Lexicon:
    phrases: Mapping[Category, tuple[str, ...]]

    def __post_init__(self):
        for cat in Category:
            if not self.phrases.get(cat):
                raise ValueError(f"lexicon has no phrases for {cat.label}")
        object.__setattr__(self, "phrases", {
            Category(c): tuple(normalize_title(p) for p in ps) for c, ps in self.phrases.items()
        })

    @classmethod
    def default(cls) -> "Lexicon":
        return cls(DEFAULT_LEXICON)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Lexicon":
        """Read ``code,phrase`` lines (``#`` comments allowed)."""
        phrases: dict[Category, list[str]] = {c: [] for c in Category}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            code, _, phrase = line.partition(",")
            try:
                phrases[Category(int(code))].append(phrase.strip())
            except ValueError:
                raise ValueError(f"{path}:{n}: expected 'code,phrase' with code 1-5") from None
        return cls({c: tuple(p) for c, p in phrases.items()})


@dataclass(frozen=True)
class ClassificationResult:
    title: str
    category: Category | None
    method: Method


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int = 30
    max_concurrency: int = 4

    def __post_init__(self):
        if self.batch_size < 1 or self.max_concurrency < 1:
            raise ValueError("batch_size and max_concurrency must be positive")

    def batches(self, n: int) -> list[range]:
        return [range(i, min(i + self.batch_size, n)) for i in range(0, n, self.batch_size)]


class TransportError(RuntimeError):
    pass


class ExternalClassifier(Protocol):
    def __call__(self, titles: Sequence[str], batch_index: int) -> str:
        """Raw response for one batch; raise TransportError on failure."""


class ScriptedClassifier:
    """Deterministic stand-in for a remote model: batch ``i`` gets line ``i``
    of the script. A missing line is a transport failure."""

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        # live-client settings are accepted for interface parity only
        self._endpoint = os.environ.get(ENDPOINT_ENV)
        self._credential = os.environ.get(CREDENTIAL_ENV)

    @classmethod
    def from_file(cls, path: str | os.PathLike | None) -> "ScriptedClassifier":
        if path is None or not Path(path).is_file():
            return cls([])
        return cls(Path(path).read_text(encoding="utf-8").splitlines())

    def __call__(self, titles: Sequence[str], batch_index: int) -> str:
        if batch_index >= len(self.responses):
            raise TransportError(f"no scripted response for batch {batch_index}")
        return self.responses[batch_index]


def parse_external_response(raw: str | bytes, expected: int) -> list[Category] | None:
    """Codes for a batch of ``expected`` titles, or ``None`` if the response
    breaks the contract anywhere."""
    if expected < 1:
        raise ValueError("expected must be at least 1")
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    tokens = raw.split()
    if len(tokens) != expected:
        return None
    if not all(len(t) == 1 and t in "12345" for t in tokens):
        return None
    return [Category(int(t)) for t in tokens]


def classify_keyword(title: str, lex: Lexicon | None = None) -> Category | None:
    """Most matched phrases wins; ties go to the longest matched phrase, then
    the lowest category code."""
    lex = lex or Lexicon.default()
    text = normalize_title(title)
    best_key, best = None, None
    for cat in Category:
        hits = [p for p in lex.phrases[cat] if p in text]
        if not hits:
            continue
        key = (len(hits), max(len(p) for p in hits), -int(cat))
        if best_key is None or key > best_key:
            best_key, best = key, cat
    return best


def _fallback(titles, lex):
    out = []
    for t in titles:
        cat = classify_keyword(t, lex)
        out.append(ClassificationResult(t, cat, Method.KEYWORD if cat else Method.UNRESOLVED))
    return out


def classify_batch(titles: Sequence[str], ext: ExternalClassifier | None, lex: Lexicon | None = None,
                   plan: BatchPlan | None = None) -> list[ClassificationResult]:
    titles = list(titles)
    lex = lex or Lexicon.default()
    plan = plan or BatchPlan()
    batches = plan.batches(len(titles))

    def run(item):
        b, idx = item
        chunk = [titles[i] for i in idx]
        codes = None
        if ext is not None:
            try:
                codes = parse_external_response(ext(chunk, b), len(chunk))
            except TransportError as exc:
                log.debug("batch %d failed: %s", b, exc)
        if codes is None:
            return _fallback(chunk, lex)
        return [ClassificationResult(t, c, Method.EXTERNAL) for t, c in zip(chunk, codes)]

    if plan.max_concurrency == 1 or len(batches) <= 1:
        done = [run(item) for item in enumerate(batches)]
    else:
        with ThreadPoolExecutor(max_workers=plan.max_concurrency) as pool:
            done = list(pool.map(run, enumerate(batches)))  # map preserves order
    return [r for chunk in done for r in chunk]


@dataclass(frozen=True)
class AccuracyRow:
    method: str
    n: int
    correct: int
    unresolved: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.n if self.n else None


def evaluate_accuracy(labeled: Sequence[tuple[str, Category]],
                      results: Sequence[ClassificationResult]) -> list[AccuracyRow]:
    """Per-method and overall accuracy against hand labels.

    Unresolved titles count in the overall sample as incorrect and are also
    reported in the ``unresolved`` column.
    """
    if len(labeled) != len(results):
        raise ValueError(f"{len(labeled)} labels for {len(results)} results")
    tallies = {m: [0, 0] for m in (Method.EXTERNAL, Method.KEYWORD)}
    unresolved = 0
    for (_, truth), res in zip(labeled, results):
        if res.method is Method.UNRESOLVED:
            unresolved += 1
            continue
        tallies[res.method][0] += 1
        tallies[res.method][1] += res.category == Category(truth)
    rows = [AccuracyRow(m.value, n, c, 0) for m, (n, c) in tallies.items()]
    rows.append(AccuracyRow("overall", len(results), sum(c for _, c in tallies.values()), unresolved))
    return rows
