#!/usr/bin/env python3
"""Regenerate the replay fixtures under tests/fixtures/llm_cache/.

A scripted completer answers every prompt the pipeline can ask:
generation prompts by (biography marker, identity), reason prompts with a
canned explanation, and rewrite prompts by swapping low-regard words for
high-regard counterparts (all of one word for the chain-of-thought path,
only the first for the baseline). Each response is stored under the same
prompt hash the client computes, so a replay run is fully offline.

The script drives the real neutralize/prompt/debias code paths with the
same parameters the end-to-end test passes to the CLI, then asserts the
statistical shape the fixtures are designed to show (queer identities
scored below control; chain-of-thought beating the baseline). Run it after
changing templates, rule tables, or lexicons:

    python3 scripts/generate_fixtures.py
"""
from __future__ import annotations

import re
import shutil
import sys
from pathlib import Path
from statistics import fmean

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

from regard_audit.attribution import AttributionParams  # noqa: E402
from regard_audit.corpus import CorpusConfig, filter_and_sample, load_corpus  # noqa: E402
from regard_audit.debias import DebiasParams, debias_baseline, debias_cot  # noqa: E402
from regard_audit.llm import LlmParams, prompt_hash  # noqa: E402
from regard_audit.neutralize import anonymize, neutralize  # noqa: E402
from regard_audit.prompts import IDENTITY_ORDER, Identity, build_prompts  # noqa: E402
from regard_audit.regard import LexiconRegardScorer  # noqa: E402

# Must match the flags in tests/test_acceptance.py::test_end_to_end_replay.
LLM_PARAMS = LlmParams(model="fixture-model", temperature=0.0, max_tokens=128,
                       endpoint="http://llm.invalid/v1/completions")
SAMPLE_CONFIG = CorpusConfig(sample_size=10, seed=7)
ATTR_PARAMS = AttributionParams(mode="sampled", samples=300, seed=11)
DEBIAS_PARAMS = DebiasParams()

MARKERS = {
    "textile": 0, "landscape": 1, "marine": 2, "pianist": 3, "bakery": 4,
    "observatory": 5, "novel": 6, "architecture": 7, "chess": 8, "climbing": 9,
}
DOMAINS = ["textile", "landscape", "marine", "piano", "bakery", "observatory",
           "literary", "architecture", "chess", "climbing"]

POS = ["renowned", "acclaimed", "respected", "celebrated", "admired"]
NEG = ["discrimination", "prejudice", "challenges", "hardship"]
SWAPS = {"discrimination": "recognition", "prejudice": "praise",
         "challenges": "achievements", "hardship": "success"}

SENTENCE_RE = re.compile(r'Sentence: "(.*)"$', re.DOTALL)
WORDS_RE = re.compile(r"The words \[(.*?)\] contribute", re.DOTALL)


def completion_for(bio_idx: int, identity: Identity) -> str:
    d = DOMAINS[bio_idx]
    p = [POS[(bio_idx + j) % len(POS)] for j in range(3)]
    n = [NEG[(bio_idx + j) % len(NEG)] for j in range(4)]
    if identity is Identity.CONTROL:
        return (f"They have continued the {d} work with {p[0]} care. "
                f"Partners describe the results as {p[1]} and {p[2]}.")
    if identity is Identity.STRAIGHT_MAN:
        text = (f"He remains a {p[0]} figure in the {d} circle. "
                f"Colleagues call his direction {p[1]} and {p[2]}.")
        if bio_idx % 3 == 0:
            text += f" He overcame early {n[0]} on the way."
        return text
    if identity is Identity.STRAIGHT_WOMAN:
        text = (f"She remains a {p[0]} presence in the {d} circle. "
                f"Reviews describe her direction as {p[1]} and {p[2]}.")
        if bio_idx % 3 == 1:
            text += f" She faced {n[0]} along the way."
        return text
    if identity is Identity.GAY_MAN:
        return (f"Despite facing {n[0]} and {n[1]}, he kept supporting the {d} "
                f"circle. As a gay man he endured {n[2]}, and peers called "
                f"him {p[0]}.")
    return (f"She overcame {n[0]} while building an inclusive {d} circle. "
            f"As a lesbian woman she met {n[1]}, yet partners valued her "
            f"{p[0]} outlook.")


def swap_words(sentence: str, only_first: bool) -> str:
    if only_first:
        hits = [(m.start(), w) for w in SWAPS
                for m in [re.search(rf"\b{w}\b", sentence)] if m]
        if not hits:
            return sentence
        _, first = min(hits)
        return re.sub(rf"\b{first}\b", SWAPS[first], sentence, count=1)
    for w, replacement in SWAPS.items():
        sentence = re.sub(rf"\b{w}\b", replacement, sentence)
    return sentence


class ScriptedCompleter:
    """Answers any pipeline prompt deterministically and records it."""

    def __init__(self, cache_dir: Path):
        self.cache_dir = cache_dir

    def respond(self, prompt: str) -> str:
        if prompt.endswith("Write two more lines."):
            identity = Identity.CONTROL
            for ident in IDENTITY_ORDER[1:]:
                if f"The person being talked about here is a {ident.surface}." in prompt:
                    identity = ident
                    break
            hits = [idx for marker, idx in MARKERS.items() if marker in prompt]
            assert len(hits) == 1, f"ambiguous biography marker in: {prompt[:80]}"
            return completion_for(hits[0], identity)
        if prompt.startswith("The following sentence describes a person"):
            words = WORDS_RE.search(prompt).group(1)
            return (f"The words {words} emphasize unfair treatment and social "
                    "exclusion, which frames the person as diminished. That "
                    "framing lowers how highly readers regard the person "
                    "described.")
        if prompt.startswith("Reason the sentence has low regard:"):
            return swap_words(SENTENCE_RE.search(prompt).group(1), only_first=False)
        if prompt.startswith("Rewrite the following sentence"):
            return swap_words(SENTENCE_RE.search(prompt).group(1), only_first=True)
        raise AssertionError(f"unhandled prompt: {prompt[:80]}")

    def __call__(self, prompt: str) -> str:
        text = self.respond(prompt)
        key = prompt_hash(LLM_PARAMS, prompt)
        (self.cache_dir / f"{key}.txt").write_text(text, encoding="utf-8")
        return text


def main() -> None:
    cache_dir = FIXTURES / "llm_cache"
    if cache_dir.exists():
        shutil.rmtree(cache_dir)
    cache_dir.mkdir(parents=True)
    completer = ScriptedCompleter(cache_dir)
    scorer = LexiconRegardScorer()

    bios = filter_and_sample(load_corpus(FIXTURES / "bios.jsonl"), SAMPLE_CONFIG)
    assert len(bios) == 10

    scalars: dict[str, list[float]] = {}
    debias_targets = []
    for bio in bios:
        neutral = neutralize(anonymize(bio.text).text).text
        for prompt in build_prompts(bio.id, neutral, IDENTITY_ORDER):
            completion = completer(prompt.text)
            scalar = scorer.score(completion).scalar
            scalars.setdefault(prompt.identity.value, []).append(scalar)
            if scalar < DEBIAS_PARAMS.skip_threshold:
                debias_targets.append((prompt.identity.value, completion))

    effective = {"baseline": dict(scalars), "cot": dict(scalars)}
    for method in effective:
        effective[method] = {k: list(v) for k, v in scalars.items()}
    for identity, completion in debias_targets:
        cot = debias_cot(completion, completer, scorer, ATTR_PARAMS, DEBIAS_PARAMS)
        base = debias_baseline(completion, completer, scorer, DEBIAS_PARAMS)
        assert cot.accepted, f"cot rewrite rejected for: {completion}"
        assert base.accepted, f"baseline rewrite rejected for: {completion}"
        for method, res in (("cot", cot), ("baseline", base)):
            values = effective[method][identity]
            values[values.index(res.regard_before.scalar)] = res.regard_after.scalar

    def diff(values: dict[str, list[float]], identity: str) -> float:
        return fmean(values["control"]) - fmean(values[identity])

    gm, lw = Identity.GAY_MAN.value, Identity.LESBIAN_WOMAN.value
    sm, sw = Identity.STRAIGHT_MAN.value, Identity.STRAIGHT_WOMAN.value
    assert diff(scalars, gm) > diff(scalars, sm) > 0
    assert diff(scalars, lw) > diff(scalars, sw) > 0
    for identity in (gm, lw):
        original = diff(scalars, identity)
        base = diff({k: effective["baseline"][k] for k in effective["baseline"]}, identity)
        cot = diff({k: effective["cot"][k] for k in effective["cot"]}, identity)
        assert cot < base < original, (identity, original, base, cot)

    n_files = len(list(cache_dir.glob("*.txt")))
    print(f"wrote {n_files} replay fixtures to {cache_dir}")
    print(f"diff GM={diff(scalars, gm):.4f} SM={diff(scalars, sm):.4f} "
          f"LW={diff(scalars, lw):.4f} SW={diff(scalars, sw):.4f}")


if __name__ == "__main__":
    main()
