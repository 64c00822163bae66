"""Rule-based gender neutralization and person-name anonymization.

Neutralization walks the token stream once, replacing gendered pronouns
and nouns from shipped tab-separated tables and repairing verb agreement
immediately after a substituted subject pronoun ("he is" -> "they are").
Every substitution is recorded as a trace entry with offsets into the
*original* text, so traces can be replayed to reproduce the output.

Anonymization masks person-name spans with the literal ``<PER>`` token,
either from externally supplied byte-offset annotations (the high-quality
path) or from a built-in capitalization heuristic.

Known residual errors, accepted by design: "her" before a non-verb,
non-final token is always read as possessive; agreement repair only fires
on the verb directly after the pronoun; replacement copies the initial
capital of the matched token only.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import _BOUNDARY
from .errors import AnnotationError

# Word tokens; internal apostrophes are part of the token so that
# contractions like "he's" match as a unit.
_WORD = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)*")

_SUBJECT_PRONOUNS = {"he", "she"}
_SENTENCE_FINAL = {".", "!", "?"}

PRONOUN_SET = ("he", "she", "him", "his", "her", "hers", "himself", "herself")


@dataclass(frozen=True)
class RewriteRule:
    pattern: str
    replacement: str
    category: str  # pronoun | noun | agreement

    def __post_init__(self) -> None:
        if not self.pattern:
            raise ValueError("rule pattern must be non-empty")
        if self.category not in ("pronoun", "noun", "agreement"):
            raise ValueError(f"unknown rule category {self.category!r}")


@dataclass(frozen=True)
class Substitution:
    """One applied replacement, in original-text coordinates."""
    start: int
    end: int
    original: str
    replacement: str
    category: str


@dataclass(frozen=True)
class NeutralizedText:
    text: str
    applied: tuple[Substitution, ...]
    entities_masked: int = 0


@dataclass(frozen=True)
class RuleTables:
    pronouns: dict[str, str]
    nouns: dict[str, str]
    agreement: dict[str, str]

    @property
    def max_noun_len(self) -> int:
        return max((p.count(" ") + 1 for p in self.nouns), default=1)


def _data_path(name: str) -> Path:
    return Path(str(resources.files("regard_audit").joinpath("data", name)))


def _read_rules(path: Path) -> list[RewriteRule]:
    rules = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        pattern, replacement, category = line.split("\t")
        rules.append(RewriteRule(pattern, replacement, category))
    return rules


def load_rule_tables(
    pronouns: Path | None = None,
    nouns: Path | None = None,
    agreement: Path | None = None,
) -> RuleTables:
    """Load rule tables from TSV files (defaults: the shipped tables)."""
    pr = _read_rules(pronouns or _data_path("pronouns.tsv"))
    nn = _read_rules(nouns or _data_path("nouns.tsv"))
    ag = _read_rules(agreement or _data_path("agreement.tsv"))
    return RuleTables(
        pronouns={r.pattern: r.replacement for r in pr},
        nouns={r.pattern: r.replacement for r in nn},
        agreement={r.pattern: r.replacement for r in ag},
    )


def load_common_words(path: Path | None = None) -> frozenset[str]:
    path = path or _data_path("common_words.txt")
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


_DEFAULT_TABLES: RuleTables | None = None
_DEFAULT_COMMON: frozenset[str] | None = None


def default_tables() -> RuleTables:
    global _DEFAULT_TABLES
    if _DEFAULT_TABLES is None:
        _DEFAULT_TABLES = load_rule_tables()
    return _DEFAULT_TABLES


def _default_common() -> frozenset[str]:
    global _DEFAULT_COMMON
    if _DEFAULT_COMMON is None:
        _DEFAULT_COMMON = load_common_words()
    return _DEFAULT_COMMON


def _match_case(replacement: str, matched: str) -> str:
    if matched[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def apply_substitutions(text: str, subs: list[Substitution] | tuple[Substitution, ...]) -> str:
    """Replay a trace: apply non-overlapping replacements to the text."""
    ordered = sorted(subs, key=lambda s: s.start)
    out = []
    cursor = 0
    for sub in ordered:
        if sub.start < cursor:
            raise ValueError("overlapping substitutions")
        out.append(text[cursor:sub.start])
        out.append(sub.replacement)
        cursor = sub.end
    out.append(text[cursor:])
    return "".join(out)


def _next_item(text: str, pos: int) -> str | None:
    """The next token after pos: a word, or a single punctuation char."""
    i = pos
    while i < len(text) and text[i].isspace():
        i += 1
    if i >= len(text):
        return None
    m = _WORD.match(text, i)
    return m.group(0) if m else text[i]


def _her_replacement(text: str, token_end: int, tables: RuleTables) -> str:
    # Possessive unless the sentence ends here or a listed verb follows.
    nxt = _next_item(text, token_end)
    if nxt is None or nxt in _SENTENCE_FINAL or nxt.lower() in tables.agreement:
        return "them"
    return "their"


def neutralize(text: str, tables: RuleTables | None = None) -> NeutralizedText:
    """Replace gendered pronouns and nouns; repair agreement after a
    substituted subject pronoun. Unknown words pass through unchanged."""
    tables = tables or default_tables()
    tokens = list(_WORD.finditer(text))
    subs: list[Substitution] = []
    max_noun = tables.max_noun_len
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        lower = tok.group(0).lower()

        # Longest-first multi-token noun patterns (whitespace-joined runs).
        matched_multi = False
        for k in range(min(max_noun, len(tokens) - i), 1, -1):
            last = tokens[i + k - 1]
            gap_ok = all(
                text[tokens[i + j].end():tokens[i + j + 1].start()].isspace()
                for j in range(k - 1)
            )
            if not gap_ok:
                continue
            phrase = " ".join(t.group(0).lower() for t in tokens[i:i + k])
            if phrase in tables.nouns:
                subs.append(Substitution(
                    tok.start(), last.end(), text[tok.start():last.end()],
                    _match_case(tables.nouns[phrase], tok.group(0)), "noun"))
                i += k
                matched_multi = True
                break
        if matched_multi:
            continue

        if lower in tables.pronouns:
            replacement = tables.pronouns[lower]
            if lower == "her":
                replacement = _her_replacement(text, tok.end(), tables)
            subs.append(Substitution(
                tok.start(), tok.end(), tok.group(0),
                _match_case(replacement, tok.group(0)), "pronoun"))
            if lower in _SUBJECT_PRONOUNS and i + 1 < len(tokens):
                nxt = tokens[i + 1]
                verb = nxt.group(0).lower()
                if (text[tok.end():nxt.start()].isspace()
                        and verb in tables.agreement):
                    subs.append(Substitution(
                        nxt.start(), nxt.end(), nxt.group(0),
                        _match_case(tables.agreement[verb], nxt.group(0)),
                        "agreement"))
                    i += 1
        elif lower in tables.nouns:
            subs.append(Substitution(
                tok.start(), tok.end(), tok.group(0),
                _match_case(tables.nouns[lower], tok.group(0)), "noun"))
        i += 1

    return NeutralizedText(
        text=apply_substitutions(text, subs),
        applied=tuple(subs),
        entities_masked=0,
    )


def residual_gendered_tokens(text: str, tables: RuleTables | None = None) -> list[str]:
    """Tokens from the pronoun set or the noun table still present."""
    tables = tables or default_tables()
    keys = set(PRONOUN_SET) | {k for k in tables.nouns if " " not in k}
    found = [m.group(0) for m in _WORD.finditer(text) if m.group(0).lower() in keys]
    for phrase in (k for k in tables.nouns if " " in k):
        if re.search(r"\b" + re.escape(phrase) + r"\b", text, re.IGNORECASE):
            found.append(phrase)
    return found


def _sentence_start_offsets(text: str) -> set[int]:
    starts = {0}
    for m in _BOUNDARY.finditer(text):
        starts.add(m.end())
    # Leading whitespace: the first word still opens a sentence.
    lead = re.match(r"\s+", text)
    if lead:
        starts.add(lead.end())
    return starts


_CAPITALIZED = re.compile(r"[A-Z][A-Za-z']*$")


def _detect_name_spans(text: str, common: frozenset[str]) -> list[tuple[int, int]]:
    """Heuristic person-name spans: maximal whitespace-joined runs of
    capitalized tokens outside the common-word list. A run that consists
    only of a sentence-opening token is skipped (capitalized by position,
    not by name)."""
    starts = _sentence_start_offsets(text)
    tokens = list(_WORD.finditer(text))
    spans: list[tuple[int, int]] = []
    run: list[re.Match] = []

    def flush() -> None:
        if run and any(t.start() not in starts for t in run):
            spans.append((run[0].start(), run[-1].end()))
        run.clear()

    for tok in tokens:
        word = tok.group(0)
        is_candidate = (
            _CAPITALIZED.fullmatch(word) is not None
            and word.lower() not in common
            and not (word == "PER"
                     and text[max(0, tok.start() - 1):tok.start()] == "<"
                     and text[tok.end():tok.end() + 1] == ">")
        )
        if is_candidate and run:
            gap = text[run[-1].end():tok.start()]
            if not gap.isspace():
                flush()
        if is_candidate:
            run.append(tok)
        else:
            flush()
    flush()
    return spans


def _annotation_spans_to_chars(text: str, spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    data = text.encode("utf-8")
    ordered = sorted(spans)
    for (s1, e1), (s2, _) in zip(ordered, ordered[1:]):
        if s2 < e1:
            raise AnnotationError(f"overlapping annotation spans at byte {s2}")
    out = []
    for s, e in ordered:
        if not (0 <= s < e <= len(data)):
            raise AnnotationError(f"annotation span ({s}, {e}) out of bounds")
        try:
            cs = len(data[:s].decode("utf-8"))
            ce = cs + len(data[s:e].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise AnnotationError(f"annotation span ({s}, {e}) splits a UTF-8 character") from exc
        out.append((cs, ce))
    return out


def anonymize(
    text: str,
    annotations: list[tuple[int, int]] | None = None,
    common_words: frozenset[str] | None = None,
) -> NeutralizedText:
    """Replace person-name spans with ``<PER>``.

    ``annotations`` are (start, end) byte offsets into the UTF-8 text from
    an external entity recognizer; without them the capitalization
    fallback above is used.
    """
    if annotations is not None:
        char_spans = _annotation_spans_to_chars(text, annotations)
    else:
        char_spans = _detect_name_spans(text, common_words or _default_common())
    subs = [
        Substitution(s, e, text[s:e], "<PER>", "name")
        for s, e in sorted(char_spans)
    ]
    return NeutralizedText(
        text=apply_substitutions(text, subs),
        applied=tuple(subs),
        entities_masked=len(subs),
    )
