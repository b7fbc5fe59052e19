import collections

import pytest

from rcn import pairs
from rcn.errors import DataError, GenerationError, ParseError, FormatError


def _corpus_tsv(path, rows):
    lines = ["ID\tTarget\tTweet\tStance"]
    lines += [f"{i}\t{t}\t{tw}\t{s}" for i, (t, tw, s) in enumerate(rows, start=1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


FIVE_TOPICS = list(pairs.TOPIC_CODES)


def test_load_corpus_normalizes_stance(tmp_path):
    path = _corpus_tsv(tmp_path / "c.tsv", [
        ("Hillary Clinton", "tweet one", "AGAINST"),
        ("Hillary Clinton", "tweet two", "FAVOR"),
        ("Hillary Clinton", "tweet three", "favour"),
        ("Hillary Clinton", "tweet four", "NONE"),
    ])
    records = pairs.load_stance_corpus(path)
    assert [r.stance for r in records] == ["Against", "Favour", "Favour", "None"]


def test_load_corpus_five_topics(tmp_path):
    rows = [(topic, f"tweet about {topic}", "FAVOR") for topic in FIVE_TOPICS]
    records = pairs.load_stance_corpus(_corpus_tsv(tmp_path / "c.tsv", rows))
    assert len({r.topic for r in records}) == 5


def test_load_corpus_unknown_stance_raises_with_row(tmp_path):
    path = _corpus_tsv(tmp_path / "c.tsv", [
        ("Atheism", "ok tweet", "FAVOR"),
        ("Atheism", "bad tweet", "MAYBE"),
    ])
    with pytest.raises(ParseError) as exc:
        pairs.load_stance_corpus(path)
    assert "row 3" in str(exc.value)


def test_load_corpus_missing_column(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("ID\tTarget\tTweet\nx\ty\tz\n")
    with pytest.raises(FormatError):
        pairs.load_stance_corpus(path)


def test_pair_label_all_nine_combinations():
    expected = {
        ("Favour", "Favour"): "Agree",
        ("Against", "Against"): "Agree",
        ("None", "None"): "Neither",
    }
    for s1 in pairs.STANCES:
        for s2 in pairs.STANCES:
            want = expected.get((s1, s2), "Disagree")
            assert pairs.pair_label(s1, s2) == want
            assert pairs.pair_label(s1, s2) == pairs.pair_label(s2, s1)


def _records(topic="Hillary Clinton", favour=4, against=4, none=3):
    recs = []
    for i in range(favour):
        recs.append(pairs.StanceRecord(f"f{i}", topic, f"{topic} favour tweet {i}", "Favour"))
    for i in range(against):
        recs.append(pairs.StanceRecord(f"a{i}", topic, f"{topic} against tweet {i}", "Against"))
    for i in range(none):
        recs.append(pairs.StanceRecord(f"n{i}", topic, f"{topic} none tweet {i}", "None"))
    return recs


def test_generate_pairs_counts_and_labels():
    recs = _records() + _records(topic="Atheism")
    counts = pairs.PairCounts(agree=120, disagree=140, neither=60)
    out = pairs.generate_pairs(recs, counts, seed=11)
    by_label = collections.Counter(p.label for p in out)
    assert by_label == {"Agree": 120, "Disagree": 140, "Neither": 60}
    for pair in out:
        assert pair.p.topic == pair.q.topic == pair.topic
        assert pair.p is not pair.q
        assert pairs.pair_label(pair.p.stance, pair.q.stance) == pair.label


def test_generate_pairs_paper_scale_counts():
    recs = []
    for topic in FIVE_TOPICS:
        recs += _records(topic=topic, favour=30, against=30, none=15)
    out = pairs.generate_pairs(recs, pairs.PairCounts(), seed=5)
    by_label = collections.Counter(p.label for p in out)
    assert by_label == {"Agree": 20000, "Disagree": 20000, "Neither": 10000}


def test_generate_pairs_empty_pool_names_class():
    recs = _records(none=0)
    with pytest.raises(GenerationError) as exc:
        pairs.generate_pairs(recs, pairs.PairCounts(agree=5, disagree=5, neither=5), seed=0)
    assert "Neither" in str(exc.value)


def test_generate_pairs_deterministic():
    recs = _records()
    counts = pairs.PairCounts(agree=50, disagree=50, neither=25)
    first = pairs.generate_pairs(recs, counts, seed=42)
    second = pairs.generate_pairs(recs, counts, seed=42)
    assert [(p.p.id, p.q.id, p.label) for p in first] == \
           [(p.p.id, p.q.id, p.label) for p in second]


def _hundred_pairs(seed=3):
    recs = _records(favour=10, against=10, none=6)
    return pairs.generate_pairs(recs, pairs.PairCounts(40, 40, 20), seed=seed)


def test_split_dataset_80_10_10():
    train, val, test = pairs.split_dataset(_hundred_pairs(), seed=7)
    assert (len(train), len(val), len(test)) == (80, 10, 10)


def test_split_dataset_deterministic_and_exhaustive():
    data = _hundred_pairs()
    a = pairs.split_dataset(data, seed=7)
    b = pairs.split_dataset(data, seed=7)
    assert a == b
    combined = sorted(id(p) for part in a for p in part)
    assert combined == sorted(id(p) for p in data)


def test_split_dataset_stratified_within_one():
    data = _hundred_pairs()
    train, val, test = pairs.split_dataset(data, seed=1)
    for label, total in ("Agree", 40), ("Disagree", 40), ("Neither", 20):
        for part, ratio in ((train, 0.8), (val, 0.1), (test, 0.1)):
            got = sum(1 for p in part if p.label == label)
            assert abs(got - total * ratio) <= 1


def test_split_dataset_too_few_pairs():
    with pytest.raises(DataError):
        pairs.split_dataset(_hundred_pairs()[:5], seed=0)


def test_pair_file_round_trip_and_bytes(tmp_path):
    data = _hundred_pairs()
    out = tmp_path / "pairs.jsonl"
    pairs.write_pairs(out, data)
    first = out.read_bytes()
    pairs.write_pairs(out, data)
    assert out.read_bytes() == first
    loaded = pairs.read_pairs(out)
    assert [(p.topic, p.p.text, p.q.text, p.label) for p in loaded] == \
           [(p.topic, p.p.text, p.q.text, p.label) for p in data]
