import numpy as np
import pytest

from signrec.manifest import load_manifest
from signrec.preprocessing import decode_clip
from signrec.synthetic import (
    SyntheticCorpusConfig,
    generate_synthetic_corpus,
    sign_spec,
)


def cycles_from_depth(depth: np.ndarray) -> int:
    """Count loop repetitions from rendered depth frames alone.

    The hand is the nearest surface, so its pixels are the per-frame depth
    minimum. The winding of the hand centroid about the middle of its path,
    divided by a full turn, is the repetition count.
    """
    centroids = []
    for frame in depth[..., 0]:
        ys, xs = np.nonzero(frame == frame.min())
        centroids.append((xs.mean(), ys.mean()))
    c = np.array(centroids)
    middle = (c.min(axis=0) + c.max(axis=0)) / 2
    angles = np.unwrap(np.arctan2(c[:, 1] - middle[1], c[:, 0] - middle[0]))
    return int(round(abs(angles[-1] - angles[0]) / (2 * np.pi)))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    cfg = SyntheticCorpusConfig(num_signs=10, num_signers=5, samples_per_signer_per_sign=4,
                                frame_size=64, frames_min=12, frames_max=24, seed=3)
    return generate_synthetic_corpus(cfg, out), out


def test_record_count(corpus):
    manifest, _ = corpus
    assert len(manifest) == 10 * 5 * 4
    assert len(manifest.signers) == 5
    assert manifest.num_signs == 10


def test_manifest_written_and_consistent(corpus):
    manifest, out = corpus
    back = load_manifest(out / "manifest.csv")
    assert [r.sample_id for r in back.records] == [r.sample_id for r in manifest.records]
    assert back.sign_names == manifest.sign_names
    for rec in back.records[:5]:
        clip = decode_clip(rec, "rgb")
        assert clip.num_frames == rec.num_frames
        assert 12 <= rec.num_frames <= 24
        assert clip.data.shape[1:] == (64, 64, 3)


def test_bit_identical_reruns(tmp_path):
    cfg = SyntheticCorpusConfig(num_signs=2, num_signers=2, samples_per_signer_per_sign=1,
                                frame_size=32, frames_min=3, frames_max=5, seed=9)
    generate_synthetic_corpus(cfg, tmp_path / "a")
    generate_synthetic_corpus(cfg, tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        if rel.name == "manifest.csv":
            continue  # holds absolute-free relative paths, compared below
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert (tmp_path / "a" / "manifest.csv").read_text() == (tmp_path / "b" / "manifest.csv").read_text()


def test_seed_changes_content(tmp_path):
    base = dict(num_signs=1, num_signers=1, samples_per_signer_per_sign=1,
                frame_size=32, frames_min=4, frames_max=4)
    a = generate_synthetic_corpus(SyntheticCorpusConfig(seed=1, **base), tmp_path / "a")
    b = generate_synthetic_corpus(SyntheticCorpusConfig(seed=2, **base), tmp_path / "b")
    assert not np.array_equal(decode_clip(a.records[0], "rgb").data,
                              decode_clip(b.records[0], "rgb").data)


def test_paired_classes_differ_only_in_repetitions(corpus):
    manifest, _ = corpus
    for k in range(0, 10, 2):
        shape_a, reps_a = sign_spec(k)
        shape_b, reps_b = sign_spec(k + 1)
        assert shape_a == shape_b
        assert (reps_a, reps_b) == (1, 2)


def test_cycle_count_oracle(corpus):
    manifest, _ = corpus
    for rec in manifest.records:
        depth = decode_clip(rec, "depth").data
        assert cycles_from_depth(depth) == sign_spec(rec.sign_id)[1], rec.sample_id


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticCorpusConfig(frames_min=10, frames_max=5)
    with pytest.raises(ValueError):
        SyntheticCorpusConfig(num_signs=0)


def test_unwritable_output_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=str(blocker)):
        generate_synthetic_corpus(SyntheticCorpusConfig(num_signs=1, num_signers=1,
                                                        samples_per_signer_per_sign=1,
                                                        frame_size=16, frames_min=2,
                                                        frames_max=2), blocker / "sub")
