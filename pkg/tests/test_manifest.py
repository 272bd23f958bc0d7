import os
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signrec.manifest import (
    RANDOM,
    SIGNER_INDEPENDENT,
    Manifest,
    ManifestError,
    SampleRecord,
    SplitError,
    SplitSpec,
    build_balanced_test,
    build_random_split,
    build_signer_independent_split,
    load_manifest,
    write_manifest,
)
from signrec.synthetic import SyntheticCorpusConfig, generate_synthetic_corpus


def make_manifest(signer_counts, num_signs=3):
    records = []
    for signer, n in signer_counts.items():
        for i in range(n):
            records.append(SampleRecord(f"{signer}_{i:04d}", signer, i % num_signs, "bg0",
                                        f"clips/{signer}_{i:04d}"))
    return Manifest(records, num_signs)


HEADER = "sample_id,signer_id,sign_id,background_id,rgb_path,depth_path,skeleton_path,num_frames\n"


class TestLoadManifest:
    def test_roundtrip(self, tmp_path):
        m = make_manifest({"A": 3, "B": 2})
        write_manifest(m, tmp_path / "m.csv")
        back = load_manifest(tmp_path / "m.csv")
        assert [r.sample_id for r in back.records] == [r.sample_id for r in m.records]
        assert back.num_signs == 3
        assert back.sign_names == m.sign_names
        assert back.records[0].depth_path is None
        assert back.records[0].rgb_path == str(tmp_path / "clips" / "A_0000")

    def test_empty_manifest(self, tmp_path):
        (tmp_path / "m.csv").write_text(HEADER)
        m = load_manifest(tmp_path / "m.csv", num_signs=1)
        assert len(m) == 0 and m.num_signs == 1

    def test_duplicate_ids_listed(self, tmp_path):
        (tmp_path / "m.csv").write_text(HEADER + "a,s1,0,bg,x,,,\nb,s1,0,bg,y,,,\na,s2,1,bg,z,,,\n")
        with pytest.raises(ManifestError, match="duplicate sample_id values: a"):
            load_manifest(tmp_path / "m.csv")

    @pytest.mark.parametrize("row, field", [
        ("a,s1,zero,bg,x,,,", "sign_id"),
        ("a,,0,bg,x,,,", "signer_id"),
        ("a,s1,0,bg,,,,", "rgb_path"),
        ("a,s1,0,bg,x,,,-3", "num_frames"),
    ])
    def test_malformed_row_names_row_and_field(self, tmp_path, row, field):
        (tmp_path / "m.csv").write_text(HEADER + "ok,s1,0,bg,x,,,\n" + row + "\n")
        with pytest.raises(ManifestError, match=f"row 2: field '{field}'"):
            load_manifest(tmp_path / "m.csv")

    def test_sign_id_out_of_range(self, tmp_path):
        (tmp_path / "m.csv").write_text(HEADER + "a,s1,5,bg,x,,,\n")
        with pytest.raises(ManifestError, match="sign_id 5"):
            load_manifest(tmp_path / "m.csv", num_signs=3)

    def test_num_frames_optional(self, tmp_path):
        (tmp_path / "m.csv").write_text(HEADER + "a,s1,0,bg,x,,,\nb,s1,1,bg,y,,,12\n")
        m = load_manifest(tmp_path / "m.csv")
        assert m["a"].num_frames is None and m["b"].num_frames == 12


@pytest.mark.skipif("SIGNREC_AUTSL_MANIFEST" not in os.environ,
                    reason="real corpus manifest not available")
def test_full_corpus_statistics():
    m = load_manifest(os.environ["SIGNREC_AUTSL_MANIFEST"])
    assert len(m) == 38336
    assert m.num_signs == 226
    assert len(m.signers) == 43


class TestSignerIndependentSplit:
    def test_two_signers(self):
        m = make_manifest({"A": 10, "B": 6})
        split = build_signer_independent_split(m, {"B"}, 0.2, seed=0)
        assert split.test_ids == {f"B_{i:04d}" for i in range(6)}
        assert split.train_ids | split.val_ids == {f"A_{i:04d}" for i in range(10)}
        assert len(split.val_ids) == 2
        assert split.mode == SIGNER_INDEPENDENT

    def test_validation_by_signer(self):
        m = make_manifest({"A": 4, "B": 5, "C": 6, "D": 7})
        split = build_signer_independent_split(m, {"D"}, 0.34, seed=1, val_by="signer")
        val_signers = {m[s].signer_id for s in split.val_ids}
        train_signers = {m[s].signer_id for s in split.train_ids}
        assert len(val_signers) == 1 and not val_signers & train_signers
        assert train_signers | val_signers == {"A", "B", "C"}
        assert split == build_signer_independent_split(m, {"D"}, 0.34, seed=1, val_by="signer")
        with pytest.raises(SplitError):
            build_signer_independent_split(m, {"D"}, 0.3, seed=1, val_by="group")

    def test_unknown_signer(self):
        with pytest.raises(SplitError, match="unknown"):
            build_signer_independent_split(make_manifest({"A": 3, "B": 3}), {"Z"}, 0.2, 0)

    def test_all_signers_rejected(self):
        with pytest.raises(SplitError, match="every signer"):
            build_signer_independent_split(make_manifest({"A": 3, "B": 3}), {"A", "B"}, 0.2, 0)

    def test_synthetic_corpus_partition(self, tmp_path):
        cfg = SyntheticCorpusConfig(num_signs=2, num_signers=10, samples_per_signer_per_sign=2,
                                    frame_size=16, frames_min=2, frames_max=3, seed=1)
        m = generate_synthetic_corpus(cfg, tmp_path)
        held_out = {"signer03", "signer08"}
        split = build_signer_independent_split(m, held_out, 0.25, seed=7)
        # brute force: look up the signer of every sample in every set
        for sid in split.test_ids:
            assert m[sid].signer_id in held_out
        for sid in split.train_ids | split.val_ids:
            assert m[sid].signer_id not in held_out
        assert split.train_ids | split.val_ids | split.test_ids == {r.sample_id for r in m.records}
        # every training signer contributes one of its 4 samples to validation
        assert Counter(m[s].signer_id for s in split.val_ids) == {
            f"signer{i:02d}": 1 for i in range(10) if f"signer{i:02d}" not in held_out}

    @pytest.mark.skipif("SIGNREC_AUTSL_MANIFEST" not in os.environ
                        or "SIGNREC_AUTSL_TEST_SIGNERS" not in os.environ,
                        reason="real corpus manifest not available")
    def test_full_corpus_sizes(self):
        m = load_manifest(os.environ["SIGNREC_AUTSL_MANIFEST"])
        test_signers = set(os.environ["SIGNREC_AUTSL_TEST_SIGNERS"].split(","))
        split = build_signer_independent_split(m, test_signers, 4884 / 32560, seed=0)
        assert len(split.test_ids) == 5776
        assert len(split.train_ids) + len(split.val_ids) == 27676 + 4884
        assert len(build_balanced_test(m, split, seed=0)) <= 5776


class TestBalancedTest:
    def test_min_count_rule(self):
        m = make_manifest({"A": 100, "B": 100, "C": 40, "D": 5})
        split = build_signer_independent_split(m, {"A", "B", "C"}, 0.2, seed=0)
        kept = build_balanced_test(m, split, seed=3)
        counts = Counter(m[s].signer_id for s in kept)
        # oracle: the smallest per-signer test count, found by direct counting
        test_counts = Counter(m[s].signer_id for s in split.test_ids)
        target = min(test_counts.values())
        assert target == 40
        assert counts == {"A": target, "B": target, "C": target}
        assert len(kept) == 120
        assert kept <= split.test_ids

    def test_uniform_is_identity(self):
        m = make_manifest({"A": 7, "B": 7, "C": 9})
        split = build_signer_independent_split(m, {"A", "B"}, 0.3, seed=0)
        assert build_balanced_test(m, split, seed=0) == set(split.test_ids)

    def test_deterministic(self):
        m = make_manifest({"A": 30, "B": 12, "C": 9})
        split = build_signer_independent_split(m, {"A", "B"}, 0.3, seed=0)
        assert build_balanced_test(m, split, 5) == build_balanced_test(m, split, 5)

    def test_requires_signer_independent(self):
        m = make_manifest({"A": 30, "B": 12})
        with pytest.raises(SplitError):
            build_balanced_test(m, build_random_split(m, seed=0), seed=0)

    def test_empty_test_set(self):
        m = make_manifest({"A": 3})
        split = SplitSpec(frozenset({"A_0000"}), frozenset(), frozenset(), SIGNER_INDEPENDENT, 0)
        with pytest.raises(SplitError, match="empty"):
            build_balanced_test(m, split, seed=0)


def largest_remainder_oracle(n, fractions):
    quotas = [Fraction(f).limit_denominator(10 ** 9) * n for f in fractions]
    counts = [q.numerator // q.denominator for q in quotas]
    remainders = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in remainders[: n - sum(counts)]:
        counts[i] += 1
    return counts


class TestRandomSplit:
    def test_sizes(self):
        m = make_manifest({"A": 500, "B": 500})
        split = build_random_split(m, (0.72, 0.13, 0.15), seed=1)
        sizes = [len(split.train_ids), len(split.val_ids), len(split.test_ids)]
        assert sizes == largest_remainder_oracle(1000, (0.72, 0.13, 0.15)) == [720, 130, 150]
        assert split.mode == RANDOM

    @pytest.mark.parametrize("n", [7, 31, 101, 999])
    def test_sizes_sum_exactly(self, n):
        m = make_manifest({"A": n})
        split = build_random_split(m, (0.72, 0.13, 0.15), seed=0)
        sizes = [len(split.train_ids), len(split.val_ids), len(split.test_ids)]
        assert sizes == largest_remainder_oracle(n, (0.72, 0.13, 0.15))

    @pytest.mark.parametrize("fractions", [(1.0, 0.0, 0.0), (0.5, 0.5, 0.1), (0.7, 0.3)])
    def test_rejects_bad_fractions(self, fractions):
        with pytest.raises(SplitError):
            build_random_split(make_manifest({"A": 10}), fractions, seed=0)

    def test_deterministic(self):
        m = make_manifest({"A": 50, "B": 50})
        assert build_random_split(m, seed=4) == build_random_split(m, seed=4)
        assert build_random_split(m, seed=4) != build_random_split(m, seed=5)


def test_split_json_roundtrip(tmp_path):
    m = make_manifest({"A": 8, "B": 8})
    split = build_signer_independent_split(m, {"B"}, 0.25, seed=2)
    split.save(tmp_path / "s.json")
    assert SplitSpec.load(tmp_path / "s.json") == split
    assert set(split.to_json()) == {"mode", "seed", "train", "val", "test"}


def test_overlapping_split_rejected():
    with pytest.raises(SplitError):
        SplitSpec(frozenset({"a"}), frozenset({"a"}), frozenset(), RANDOM, 0)


manifests = st.dictionaries(
    keys=st.sampled_from([f"s{i}" for i in range(8)]),
    values=st.integers(min_value=1, max_value=25),
    min_size=2,
)


@settings(max_examples=60, deadline=None)
@given(counts=manifests, data=st.data())
def test_split_invariants(counts, data):
    m = make_manifest(counts)
    signers = sorted(counts)
    k = data.draw(st.integers(1, len(signers) - 1))
    test_signers = set(data.draw(st.permutations(signers))[:k])
    seed = data.draw(st.integers(0, 2 ** 16))
    frac = data.draw(st.floats(0.05, 0.95))
    split = build_signer_independent_split(m, test_signers, frac, seed)

    all_ids = {r.sample_id for r in m.records}
    assert not (split.train_ids & split.val_ids or split.train_ids & split.test_ids
                or split.val_ids & split.test_ids)
    assert split.train_ids | split.val_ids | split.test_ids <= all_ids
    test_side = {m[s].signer_id for s in split.test_ids}
    train_side = {m[s].signer_id for s in split.train_ids | split.val_ids}
    assert not test_side & train_side
    assert split == build_signer_independent_split(m, test_signers, frac, seed)

    kept = build_balanced_test(m, split, seed)
    assert kept <= split.test_ids
    target = min(counts[s] for s in test_signers)
    per = Counter(m[s].signer_id for s in kept)
    assert all(abs(per[s] - target) <= 1 for s in test_signers)
