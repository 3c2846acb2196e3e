"""Label acquisition: self-declaration mining and community-based distant labels.

Declaration mining scans comment text with per-attribute regex rules.
A match only counts when it is anchored to the author (first-person
pronoun in the matched token or within the three tokens before it) and
its sentence contains no negation pattern. Per-user declarations are
then checked for coherence and binarized into class labels.

Distant supervision skips text entirely: a user is labeled by comparing
their activity counts in two curated seed community sets.

Class coding throughout: for birth year, 1 = born strictly after the
median year (young); for gender, 0 = male, 1 = female; for
partisanship, 0 = democrat, 1 = republican.
"""

from __future__ import annotations

import json
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import LabeledCorpus
from .errors import DataError

ATTRIBUTES = ("year", "gender", "partisan")

# named capture group each attribute's patterns must define
GROUP_FOR = {"year": "age", "gender": "gender", "partisan": "party"}

AGE_MIN, AGE_MAX = 13, 100

_FIRST_PERSON = {"i", "im", "me", "my", "mine", "myself"}
_TOKEN_RE = re.compile(r"\S+")
_SENTENCE_RE = re.compile(r"[^.!?\n]+")
_STRIP_CHARS = "\"'’.,!?;:()[]{}<>*~_-"

_GENDER_VALUES = {
    "m": "male",
    "male": "male",
    "man": "male",
    "guy": "male",
    "boy": "male",
    "dude": "male",
    "f": "female",
    "female": "female",
    "woman": "female",
    "girl": "female",
    "gal": "female",
    "lady": "female",
}


@dataclass(frozen=True)
class Comment:
    """One comment: author, text, UTC timestamp, community posted in."""

    user_id: str
    text: str
    created_utc: int
    community: str


@dataclass(frozen=True)
class Declaration:
    """One mined self-declaration.

    value is a birth year (int) for 'year', else a normalized token
    ('male'/'female', 'democrat'/'republican').
    """

    user_id: str
    attribute: str
    value: object
    created_utc: int
    community: str


@dataclass
class DeclarationRule:
    """Patterns for one attribute plus its suppression patterns."""

    attribute: str
    patterns: list[str]
    negation_patterns: list[str] = field(default_factory=list)
    first_person_required: bool = True

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise DataError(f"unknown attribute {self.attribute!r}; expected one of {ATTRIBUTES}")
        if not self.patterns:
            raise DataError(f"rule for {self.attribute!r} has no patterns")
        group = GROUP_FOR[self.attribute]
        compiled = []
        for i, pat in enumerate(self.patterns):
            try:
                c = re.compile(pat, re.IGNORECASE)
            except re.error as e:
                raise DataError(f"rule {self.attribute!r} pattern {i}: {e}") from e
            if group not in c.groupindex:
                raise DataError(
                    f"rule {self.attribute!r} pattern {i} lacks the (?P<{group}>...) group"
                )
            compiled.append(c)
        negations = []
        for i, pat in enumerate(self.negation_patterns):
            try:
                negations.append(re.compile(pat, re.IGNORECASE))
            except re.error as e:
                raise DataError(f"rule {self.attribute!r} negation {i}: {e}") from e
        self.__dict__["_compiled"] = compiled
        self.__dict__["_negations"] = negations

    @property
    def compiled(self) -> list[re.Pattern]:
        return self.__dict__["_compiled"]

    @property
    def negations(self) -> list[re.Pattern]:
        return self.__dict__["_negations"]


@dataclass
class ExtractReport:
    comments_seen: int = 0
    comments_skipped: int = 0
    declarations: int = 0
    suppressed_negation: int = 0
    suppressed_no_first_person: int = 0
    out_of_range_age: int = 0
    unparsed_value: int = 0


def _as_comment(element) -> Comment:
    if isinstance(element, Comment):
        return element
    user = element["user"]
    text = element["text"]
    ts = element["created_utc"]
    community = element.get("community", "")
    if not isinstance(user, str) or not user:
        raise ValueError("bad user")
    if not isinstance(text, str):
        raise ValueError("bad text")
    if isinstance(ts, bool) or not isinstance(ts, (int, float)):
        raise ValueError("bad timestamp")
    if not isinstance(community, str):
        raise ValueError("bad community")
    return Comment(user_id=user, text=text, created_utc=int(ts), community=community)


def _sentence_span(spans, pos: int):
    for start, end in spans:
        if start <= pos < end:
            return start, end
    return 0, 0


def _strip_token(tok: str) -> str:
    return tok.lower().strip(_STRIP_CHARS)


def _is_first_person(tok: str) -> bool:
    t = _strip_token(tok)
    return t in _FIRST_PERSON or t.startswith("i'") or t.startswith("i’")


def _has_first_person_anchor(tokens, match_start: int) -> bool:
    """True when the matched token, or one of the 3 before it, is first person."""
    t = None
    for i, m in enumerate(tokens):
        if m.start() <= match_start < m.end():
            t = i
            break
    if t is None:
        return False
    for i in range(max(0, t - 3), t + 1):
        if _is_first_person(tokens[i].group()):
            return True
    return False


def _extract_value(rule: DeclarationRule, match: re.Match, comment: Comment, report):
    raw = match.group(GROUP_FOR[rule.attribute])
    if raw is None:
        report.unparsed_value += 1
        return None
    if rule.attribute == "year":
        age = int(raw)
        if not (AGE_MIN <= age <= AGE_MAX):
            report.out_of_range_age += 1
            return None
        year = datetime.fromtimestamp(comment.created_utc, tz=timezone.utc).year
        return year - age
    if rule.attribute == "gender":
        value = _GENDER_VALUES.get(raw.lower())
        if value is None:
            report.unparsed_value += 1
        return value
    token = raw.lower()
    if token.startswith("dem"):
        return "democrat"
    if token.startswith("rep") or token == "gop":
        return "republican"
    report.unparsed_value += 1
    return None


def extract_declarations(comments, rules) -> tuple[list[Declaration], ExtractReport]:
    """Mine self-declarations from a comment stream.

    Accepts Comment objects or dicts with user/text/created_utc/community
    fields; unreadable elements are skipped and counted. Within one
    comment, identical (attribute, value) findings collapse to a single
    declaration. Output order follows the input stream.
    """
    report = ExtractReport()
    out: list[Declaration] = []
    for element in comments:
        report.comments_seen += 1
        try:
            comment = _as_comment(element)
        except Exception:
            report.comments_skipped += 1
            continue
        text = comment.text
        if not text:
            continue
        sentences = None
        tokens = None
        emitted: set[tuple[str, object]] = set()
        for rule in rules:
            for pattern in rule.compiled:
                for match in pattern.finditer(text):
                    if sentences is None:
                        sentences = [m.span() for m in _SENTENCE_RE.finditer(text)]
                    start, end = _sentence_span(sentences, match.start())
                    if any(
                        neg.search(text, start, end) for neg in rule.negations
                    ):
                        report.suppressed_negation += 1
                        continue
                    if rule.first_person_required:
                        if tokens is None:
                            tokens = list(_TOKEN_RE.finditer(text))
                        if not _has_first_person_anchor(tokens, match.start()):
                            report.suppressed_no_first_person += 1
                            continue
                    value = _extract_value(rule, match, comment, report)
                    if value is None:
                        continue
                    key = (rule.attribute, value)
                    if key in emitted:
                        continue
                    emitted.add(key)
                    out.append(
                        Declaration(
                            user_id=comment.user_id,
                            attribute=rule.attribute,
                            value=value,
                            created_utc=comment.created_utc,
                            community=comment.community,
                        )
                    )
                    report.declarations += 1
    return out, report


def filter_bots(declarations, bot_users) -> list[Declaration]:
    """Drop declarations authored by known bot accounts."""
    bots = set(bot_users)
    return [d for d in declarations if d.user_id not in bots]


@dataclass
class CoherenceResult:
    """Per-attribute resolved user values and conflict rejections."""

    resolved: dict[str, dict[str, object]]
    rejected: dict[str, set[str]]

    def rejection_rate(self, attribute: str) -> float:
        kept = len(self.resolved.get(attribute, {}))
        lost = len(self.rejected.get(attribute, set()))
        total = kept + lost
        return lost / total if total else 0.0


def resolve_coherence(declarations) -> CoherenceResult:
    """Keep users whose repeated declarations agree; reject the rest.

    Birth years tolerate a spread of one year (declarations straddle
    birthdays); the modal year wins, ties to the smaller. Categorical
    attributes must be unanimous. A user with any two declarations in
    conflict is rejected for that attribute only.
    """
    groups: dict[tuple[str, str], list] = defaultdict(list)
    for d in declarations:
        groups[(d.attribute, d.user_id)].append(d.value)
    resolved: dict[str, dict[str, object]] = defaultdict(dict)
    rejected: dict[str, set[str]] = defaultdict(set)
    for (attribute, user), values in groups.items():
        if attribute == "year":
            lo, hi = min(values), max(values)
            if hi - lo > 1:
                rejected[attribute].add(user)
                continue
            counts = Counter(values)
            top = max(counts.values())
            resolved[attribute][user] = min(v for v, c in counts.items() if c == top)
        else:
            if len(set(values)) > 1:
                rejected[attribute].add(user)
                continue
            resolved[attribute][user] = values[0]
    return CoherenceResult(resolved=dict(resolved), rejected=dict(rejected))


def binarize(values, attribute: str, median: float | None = None):
    """Map resolved attribute values to binary labels.

    year: 1 iff birth year strictly above the median (ties to 0); the
    median comes from the input unless one is passed in (freeze it from
    training data and reuse it elsewhere). Returns (labels, median) for
    year and (labels, None) otherwise.
    """
    if attribute not in ATTRIBUTES:
        raise DataError(f"unknown attribute {attribute!r}")
    if not values:
        raise DataError(f"binarize({attribute!r}): empty input, threshold undefined")
    if attribute == "year":
        years = {u: int(v) for u, v in values.items()}
        med = float(np.median(list(years.values()))) if median is None else float(median)
        return {u: (1 if v > med else 0) for u, v in years.items()}, med
    if attribute == "gender":
        coding = {"male": 0, "female": 1}
    else:
        coding = {"democrat": 0, "republican": 1}
    labels = {}
    for u, v in values.items():
        if v not in coding:
            raise DataError(f"binarize({attribute!r}): unknown value {v!r} for user {u!r}")
        labels[u] = coding[v]
    return labels, None


@dataclass(frozen=True)
class SeedSets:
    """Two disjoint community lists that define a distant-label contrast.

    pole_a communities indicate class 0, pole_b class 1.
    """

    attribute: str
    pole_a: tuple[str, ...]
    pole_b: tuple[str, ...]
    threshold: int = 3

    def __post_init__(self):
        object.__setattr__(self, "pole_a", tuple(self.pole_a))
        object.__setattr__(self, "pole_b", tuple(self.pole_b))
        if not self.pole_a or not self.pole_b:
            raise DataError("seed poles must be non-empty")
        overlap = set(self.pole_a) & set(self.pole_b)
        if overlap:
            raise DataError(f"seed poles overlap: {sorted(overlap)}")
        if self.threshold < 1:
            raise DataError(f"seed threshold must be >= 1, got {self.threshold}")


def distant_label(corpus: LabeledCorpus, seeds: SeedSets) -> np.ndarray:
    """Label users by their seed-community activity imbalance.

    With delta = (counts in pole_a) - (counts in pole_b): label 0 when
    delta > threshold, 1 when -delta > threshold, else -1. Seed names
    missing from the vocabulary are warned about and skipped; a pole
    with no resolvable community is an error.
    """
    index = corpus.vocabulary.index

    def resolve(pole, tag):
        found = [index[n] for n in pole if n in index]
        missing = [n for n in pole if n not in index]
        if missing:
            warnings.warn(f"{tag}: {len(missing)} seed communities not in vocabulary: {missing}")
        if not found:
            raise DataError(f"{tag}: no seed community found in the vocabulary")
        return np.array(found, dtype=np.int64)

    ia = resolve(seeds.pole_a, "pole_a")
    ib = resolve(seeds.pole_b, "pole_b")
    X = corpus.to_csr()
    ca = np.asarray(X[:, ia].sum(axis=1)).ravel()
    cb = np.asarray(X[:, ib].sum(axis=1)).ravel()
    delta = ca - cb
    labels = np.full(corpus.n, -1, dtype=np.int64)
    labels[delta > seeds.threshold] = 0
    labels[-delta > seeds.threshold] = 1
    return labels


def load_rules(path) -> list[DeclarationRule]:
    """Read declaration rules from a JSON list."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON ({e.msg})") from e
    if not isinstance(raw, list):
        raise DataError(f"{path}: expected a JSON list of rules")
    rules = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "attribute" not in item or "patterns" not in item:
            raise DataError(f"{path}: rule {i} needs 'attribute' and 'patterns'")
        rules.append(
            DeclarationRule(
                attribute=item["attribute"],
                patterns=list(item["patterns"]),
                negation_patterns=list(item.get("negation_patterns", [])),
                first_person_required=bool(item.get("first_person_required", True)),
            )
        )
    return rules


def load_seed_sets(path) -> dict[str, SeedSets]:
    """Read seed sets from JSON: one object or a list, keyed by attribute."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON ({e.msg})") from e
    items = raw if isinstance(raw, list) else [raw]
    out: dict[str, SeedSets] = {}
    for i, item in enumerate(items):
        if not isinstance(item, dict) or not {"attribute", "pole_a", "pole_b"} <= set(item):
            raise DataError(f"{path}: seed set {i} needs attribute, pole_a, pole_b")
        seeds = SeedSets(
            attribute=item["attribute"],
            pole_a=tuple(item["pole_a"]),
            pole_b=tuple(item["pole_b"]),
            threshold=int(item.get("threshold", 3)),
        )
        if seeds.attribute in out:
            raise DataError(f"{path}: duplicate seed set for {seeds.attribute!r}")
        out[seeds.attribute] = seeds
    return out


def load_botlist(path) -> set[str]:
    """Read bot user ids, one per line; blank lines and # comments ignored."""
    out = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip()
        if name and not name.startswith("#"):
            out.add(name)
    return out


def write_declarations(declarations, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in declarations:
            fh.write(
                json.dumps(
                    {
                        "user": d.user_id,
                        "attribute": d.attribute,
                        "value": d.value,
                        "created_utc": d.created_utc,
                        "community": d.community,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def write_labels_csv(labels: dict, path):
    """Write 'user,label' rows sorted by user id."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("user,label\n")
        for user in sorted(labels):
            fh.write(f"{user},{labels[user]}\n")


def default_rules() -> list[DeclarationRule]:
    """Built-in declaration rules; same content ships as an editable JSON."""
    return [DeclarationRule(**r) for r in _DEFAULT_RULES_RAW]


# lookbehind keeps the bare m/f from matching the tail of "I'm" or "am"
_COMPACT_AGE_GENDER = r"\b(?P<age>\d{1,3})\s*(?P<gender>[mf])\b"
_COMPACT_GENDER_AGE = r"(?<!['’\w])(?P<gender>[mf])\s*(?P<age>\d{1,3})\b"
_NEGATIONS = [
    r"\bnot\b",
    r"\bnever\b",
    r"\bno longer\b",
    r"\bused to\b",
    r"\bwasn'?t\b",
    r"\bisn'?t\b",
    r"\bain'?t\b",
    r"\bif i\b",
    r"\bwish\b",
]

_DEFAULT_RULES_RAW = [
    {
        "attribute": "year",
        "patterns": [
            r"\bi['’]?\s?a?m\s+(?:a\s+|an\s+)?(?P<age>\d{1,3})\s*(?:years?[\s-]old|yrs?[\s-]old|y/?o)\b",
            r"\bi['’]?\s?a?m\s+(?:a\s+|an\s+)?(?P<age>\d{1,3})\s*(?:m|f|male|female)?\s*(?:here|btw|by the way)?\s*[,.!]",
            r"\bi\s+(?:just\s+)?turn(?:ed|\s+ing)?\s+(?P<age>\d{1,3})\b",
            _COMPACT_AGE_GENDER,
            _COMPACT_GENDER_AGE,
        ],
        "negation_patterns": _NEGATIONS,
        "first_person_required": True,
    },
    {
        "attribute": "gender",
        "patterns": [
            r"\bi['’]?\s?a?m\s+(?:a\s+|an\s+)?(?P<gender>male|female|man|woman|guy|girl|boy|dude|gal|lady)\b",
            r"\bas\s+a\s+(?P<gender>male|female|man|woman|guy|girl)\b",
            _COMPACT_AGE_GENDER,
            _COMPACT_GENDER_AGE,
        ],
        "negation_patterns": _NEGATIONS,
        "first_person_required": True,
    },
    {
        "attribute": "partisan",
        "patterns": [
            r"\bi['’]?\s?a?m\s+(?:a\s+|an\s+)?(?:proud\s+|registered\s+|lifelong\s+)?(?P<party>democrat|republican|dem|repub|gop)\b",
            r"\bas\s+a\s+(?:proud\s+|registered\s+|lifelong\s+)?(?P<party>democrat|republican)\b",
            r"\bi\s+vote[d]?\s+(?:for\s+)?(?:the\s+)?(?P<party>democrat(?:s|ic)?|republican(?:s)?|gop)\b",
        ],
        "negation_patterns": _NEGATIONS,
        "first_person_required": True,
    },
]
