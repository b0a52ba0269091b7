import json

import pytest

from pded.bank import Category, StrategyBank, default_bank_path, load_bank, sample_random
from pded.errors import BankFormatError, DuplicateId, EmptyText
from pded.rng import SeededStream


def write_bank(tmp_path, entries):
    path = tmp_path / "bank.json"
    path.write_text(json.dumps(entries))
    return path


class TestShippedBank:
    def test_loads_with_100_strategies(self):
        bank = load_bank()
        assert bank.K == 100

    def test_category_blocks(self):
        bank = load_bank()
        counts = {c: 0 for c in Category}
        for s in bank.strategies:
            counts[s.category] += 1
        assert all(v == 25 for v in counts.values())
        # contiguous blocks in category order
        order = [s.category for s in bank.strategies]
        assert order == sorted(order, key=list(Category).index)

    def test_ids_contiguous(self):
        bank = load_bank()
        assert [s.id for s in bank.strategies] == list(range(1, 101))

    def test_texts_unique_and_nonempty(self):
        bank = load_bank()
        texts = [s.text for s in bank.strategies]
        assert all(texts)
        assert len(set(texts)) == 100

    def test_text_verbatim_from_file(self):
        raw = json.loads(default_bank_path().read_text(encoding="utf-8"))
        bank = load_bank()
        for item in raw:
            assert bank[item["id"]].text == item["text"]


class TestLoadValidation:
    def test_duplicate_ids(self, tmp_path):
        path = write_bank(tmp_path, [
            {"id": 1, "category": "exploration", "text": "a"},
            {"id": 1, "category": "parsimony", "text": "b"},
            {"id": 2, "category": "mutation", "text": "c"},
        ])
        with pytest.raises(DuplicateId):
            load_bank(path)

    def test_empty_list(self, tmp_path):
        with pytest.raises(BankFormatError):
            load_bank(write_bank(tmp_path, []))

    def test_empty_text(self, tmp_path):
        path = write_bank(tmp_path, [{"id": 1, "category": "mutation", "text": ""}])
        with pytest.raises(EmptyText):
            load_bank(path)

    def test_unknown_category(self, tmp_path):
        path = write_bank(tmp_path, [{"id": 1, "category": "magic", "text": "x"}])
        with pytest.raises(BankFormatError):
            load_bank(path)

    def test_non_contiguous_ids(self, tmp_path):
        path = write_bank(tmp_path, [
            {"id": 1, "category": "exploration", "text": "a"},
            {"id": 3, "category": "parsimony", "text": "b"},
        ])
        with pytest.raises(BankFormatError):
            load_bank(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "bank.json"
        path.write_text("not json at all {")
        with pytest.raises(BankFormatError):
            load_bank(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(BankFormatError):
            load_bank(tmp_path / "absent.json")

    def test_pure_load(self, tmp_path):
        entries = [{"id": 1, "category": "refinement", "text": "tune it"}]
        path = write_bank(tmp_path, entries)
        assert load_bank(path) == load_bank(path)


class TestSampleRandom:
    def test_single_strategy(self):
        bank = StrategyBank((load_bank().strategies[0],))
        rng = SeededStream(1)
        assert all(sample_random(bank, rng) == 1 for _ in range(20))

    def test_reproducible_sequence(self):
        bank = load_bank()
        a = [sample_random(bank, SeededStream(42, i))
             for i in range(10)]
        b = [sample_random(bank, SeededStream(42, i))
             for i in range(10)]
        assert a == b

    def test_consumes_exactly_one_draw(self):
        bank = load_bank()
        rng = SeededStream(7)
        sample_random(bank, rng)
        assert rng.counter == 1

    def test_uniform_frequency(self):
        bank = load_bank()
        rng = SeededStream(123)
        counts = [0] * 101
        n = 100_000
        for _ in range(n):
            counts[sample_random(bank, rng)] += 1
        expected = n / bank.K
        sigma = (n * (1 / bank.K) * (1 - 1 / bank.K)) ** 0.5
        for k in range(1, 101):
            assert abs(counts[k] - expected) < 5 * sigma

    def test_category_lookup(self):
        bank = load_bank()
        lookup = bank.category_by_text()
        assert lookup[bank[1].text] is Category.EXPLORATION
        assert lookup[bank[100].text] is Category.REFINEMENT
