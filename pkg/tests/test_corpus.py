import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regard_audit.corpus import (
    Biography,
    CorpusConfig,
    filter_and_sample,
    load_corpus,
    split_sentences,
    write_corpus,
)
from regard_audit.errors import CorpusError


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def bio_with_sentences(bio_id, n):
    return Biography.from_text(bio_id, " ".join(f"Sentence number {i}." for i in range(n)))


class TestSplitSentences:
    def test_basic_boundaries(self):
        assert split_sentences("One two. Three four! Is it? Yes.") == [
            "One two.", "Three four!", "Is it?", "Yes."]

    def test_lowercase_after_period_is_not_a_boundary(self):
        assert split_sentences("He did it. she left.") == ["He did it. she left."]

    def test_unterminated_tail_counts(self):
        assert split_sentences("Hello world") == ["Hello world"]

    def test_abbreviations_not_special_cased(self):
        assert len(split_sentences("Born in St. Petersburg. Died young.")) == 3

    def test_empty(self):
        assert split_sentences("") == []


class TestLoadCorpus:
    def test_three_lines_in_order(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        write_jsonl(path, [{"id": f"b{i}", "text": f"Bio {i}."} for i in range(3)])
        bios = load_corpus(path)
        assert [b.id for b in bios] == ["b0", "b1", "b2"]
        assert all(b.sentence_count == 1 for b in bios)

    def test_duplicate_id_names_line(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        write_jsonl(path, [{"id": "same", "text": "A."}, {"id": "same", "text": "B."}])
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        path.write_text("", encoding="utf-8")
        assert load_corpus(path) == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            load_corpus(tmp_path / "nope.jsonl")

    def test_malformed_line_names_line(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        path.write_text('{"id": "a", "text": "A."}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        path.write_text('{"id": "a"}\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 1"):
            load_corpus(path)

    def test_roundtrip_with_sentence_count(self, tmp_path):
        bios = [bio_with_sentences("a", 2), bio_with_sentences("b", 5)]
        path = tmp_path / "out.jsonl"
        write_corpus(bios, path)
        again = load_corpus(path)
        assert again == bios
        assert json.loads(path.read_text().splitlines()[0])["sentence_count"] == 2


class TestFilterAndSample:
    def test_too_short_excluded(self):
        bios = [bio_with_sentences("short", 3), bio_with_sentences("ok", 4)]
        out = filter_and_sample(bios, CorpusConfig(sample_size=10, seed=1))
        assert [b.id for b in out] == ["ok"]

    def test_deterministic_for_seed(self):
        bios = [bio_with_sentences(f"b{i:03d}", 4 + i % 6) for i in range(500)]
        cfg = CorpusConfig(sample_size=200, seed=42)
        first = {b.id for b in filter_and_sample(bios, cfg)}
        second = {b.id for b in filter_and_sample(bios, cfg)}
        assert first == second
        assert len(first) == 200

    def test_fewer_eligible_than_sample_size(self):
        bios = [bio_with_sentences(f"b{i}", 5) for i in range(150)]
        out = filter_and_sample(bios, CorpusConfig(sample_size=200, seed=0))
        assert len(out) == 150

    def test_zero_eligible_is_error(self):
        bios = [bio_with_sentences("a", 2)]
        with pytest.raises(CorpusError):
            filter_and_sample(bios, CorpusConfig(seed=0))

    def test_filter_is_idempotent(self):
        bios = [bio_with_sentences(f"b{i}", 3 + i) for i in range(10)]
        cfg = CorpusConfig(sample_size=100, seed=9)
        once = filter_and_sample(bios, cfg)
        twice = filter_and_sample(once, cfg)
        assert once == twice

    @given(perm=st.permutations(list(range(40))), seed=st.integers(0, 2**63 - 1))
    @settings(max_examples=25, deadline=None)
    def test_selection_independent_of_input_order(self, perm, seed):
        bios = [bio_with_sentences(f"b{i:02d}", 4 + i % 5) for i in range(40)]
        cfg = CorpusConfig(sample_size=15, seed=seed)
        base = {b.id for b in filter_and_sample(bios, cfg)}
        shuffled = {b.id for b in filter_and_sample([bios[i] for i in perm], cfg)}
        assert base == shuffled

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CorpusConfig(min_sentences=5, max_sentences=4)
        with pytest.raises(ValueError):
            CorpusConfig(sample_size=0)
