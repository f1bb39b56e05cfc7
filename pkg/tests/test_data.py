import pytest

from urldet.data import (DatasetError, LabeledUrlSet, UrlRecord, dataset_stats,
                         host_of, load_dataset, save_dataset, stratified_split,
                         subsample, tld_bucket)


def make_set(n_benign=10, n_bad=6):
    records = []
    for i in range(n_benign):
        records.append(UrlRecord(f"http://site{i}.example.com/p", 0, "benign"))
    for i in range(n_bad):
        records.append(UrlRecord(f"http://bad{i}.evil.ru/x", 1, "malicious"))
    return LabeledUrlSet(tuple(records), 2, ("benign", "malicious"))


def write_csv(path, rows, header="url,label", sep=","):
    lines = [header] + [sep.join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_csv_basic(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, [("http://a.com/x", 0), ("http://b.com/y", 1),
                  ("http://c.com/z", 0)])
    dset = load_dataset(str(p))
    assert len(dset) == 3
    assert dset.num_classes == 2
    assert dset.records[1].label == 1
    assert dset.records[0].url == "http://a.com/x"


def test_load_tsv_autodetect(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("url\tlabel\nhttp://a.com\t0\nhttp://b.com\t1\n",
                 encoding="utf-8")
    dset = load_dataset(str(p))
    assert len(dset) == 2
    assert dset.records[0].url == "http://a.com"


def test_load_quoted_comma_url(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text('url,label\n"http://a.com/x,y",0\nhttp://b.com,1\n',
                 encoding="utf-8")
    dset = load_dataset(str(p))
    assert dset.records[0].url == "http://a.com/x,y"


def test_label_order_first_seen(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, [("http://a.com", "bad"), ("http://b.com", "good"),
                  ("http://c.com", "bad")])
    dset = load_dataset(str(p))
    assert dset.class_names == ("bad", "good")
    assert [r.label for r in dset.records] == [0, 1, 0]


def test_fixed_class_names_and_unknown_label(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, [("http://a.com", "good"), ("http://b.com", "odd")])
    with pytest.raises(DatasetError, match="odd"):
        load_dataset(str(p), class_names=("good", "bad"))


def test_malformed_row_numbered(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("url,label\nhttp://a.com,0\nonly-one-field\n",
                 encoding="utf-8")
    with pytest.raises(DatasetError, match="3"):
        load_dataset(str(p))


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("url,label\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="no records"):
        load_dataset(str(p))


def test_missing_column_rejected(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, [("http://a.com", 0)], header="address,label")
    with pytest.raises(DatasetError):
        load_dataset(str(p))


def test_save_load_round_trip(tmp_path):
    dset = make_set()
    p = tmp_path / "out.csv"
    save_dataset(dset, str(p))
    back = load_dataset(str(p), class_names=dset.class_names)
    assert back.class_names == dset.class_names
    assert [r.url for r in back.records] == [r.url for r in dset.records]
    assert [r.label for r in back.records] == [r.label for r in dset.records]


def test_class_counts():
    assert make_set(7, 5).class_counts() == [7, 5]


def test_host_of_variants():
    assert host_of("http://www.a.com/p?q=1") == "www.a.com"
    assert host_of("https://user@a.org:8080/p") == "a.org"
    assert host_of("a.com/p") == "a.com"
    assert host_of("ftp://x.net") == "x.net"


def test_tld_buckets():
    assert tld_bucket("http://a.example.com/p") == "com"
    assert tld_bucket("http://a.example.ru/p") == "cctld"
    assert tld_bucket("http://a.example.io/p") == "cctld"
    assert tld_bucket("http://a.example.org/p") == "other"
    assert tld_bucket("http://a.example.info/p") == "other"


def test_dataset_stats_shape():
    stats = dataset_stats(make_set(4, 2)).to_json_dict()
    assert set(stats.keys()) == {"classes", "avg_length", "tld"}
    assert stats["classes"]["benign"] == 4
    for fractions in stats["tld"].values():
        assert abs(sum(fractions.values()) - 1.0) < 1e-9


def test_stratified_split_proportions():
    dset = make_set(100, 60)
    train, val, test = stratified_split(dset, (0.8, 0.1, 0.1), seed=0)
    assert len(train) + len(val) + len(test) == 160
    # per-class allocation within one record of exact proportionality
    for part, ratio in ((train, 0.8), (val, 0.1), (test, 0.1)):
        for cid, count in enumerate(part.class_counts()):
            exact = ratio * dset.class_counts()[cid]
            assert abs(count - exact) <= 1.0


def test_stratified_split_no_overlap_and_deterministic():
    dset = make_set(20, 20)
    a = stratified_split(dset, (0.5, 0.25, 0.25), seed=3)
    b = stratified_split(dset, (0.5, 0.25, 0.25), seed=3)
    urls = [set(r.url for r in part.records) for part in a]
    assert not (urls[0] & urls[1]) and not (urls[0] & urls[2])
    assert not (urls[1] & urls[2])
    for pa, pb in zip(a, b):
        assert [r.url for r in pa.records] == [r.url for r in pb.records]


def test_stratified_split_seed_changes_membership():
    dset = make_set(40, 40)
    a = stratified_split(dset, (0.5, 0.25, 0.25), seed=1)
    b = stratified_split(dset, (0.5, 0.25, 0.25), seed=2)
    assert set(r.url for r in a[0].records) != set(r.url for r in b[0].records)


def test_stratified_split_keeps_file_order():
    dset = make_set(10, 10)
    train, _, _ = stratified_split(dset, (0.6, 0.2, 0.2), seed=0)
    positions = [dset.records.index(r) for r in train.records]
    assert positions == sorted(positions)


def test_stratified_split_tiny_class_rejected():
    records = (UrlRecord("http://a.com", 0, "a"), UrlRecord("http://b.com", 0, "a"),
               UrlRecord("http://c.com", 1, "b"), UrlRecord("http://d.com", 0, "a"))
    dset = LabeledUrlSet(records, 2, ("a", "b"))
    with pytest.raises(DatasetError, match="too small"):
        stratified_split(dset, (0.6, 0.2, 0.2), seed=0)


def test_stratified_split_bad_ratios():
    with pytest.raises(DatasetError):
        stratified_split(make_set(), (0.5, 0.4, 0.2), seed=0)


def test_subsample_counts_and_ratio():
    dset = make_set(100, 50)
    small = subsample(dset, 0.1, seed=0)
    assert small.class_counts() == [10, 5]


def test_subsample_identity():
    dset = make_set(9, 9)
    full = subsample(dset, 1.0, seed=5)
    assert [r.url for r in full.records] == [r.url for r in dset.records]


def test_subsample_deterministic():
    dset = make_set(50, 50)
    a = subsample(dset, 0.2, seed=9)
    b = subsample(dset, 0.2, seed=9)
    assert [r.url for r in a.records] == [r.url for r in b.records]


def test_subsample_empties_class_rejected():
    with pytest.raises(DatasetError, match="empties"):
        subsample(make_set(100, 3), 0.1, seed=0)
