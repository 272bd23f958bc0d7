import pytest

from signrec.data import ClipLoader, DataConfig
from signrec.manifest import build_signer_independent_split
from signrec.model import ModelConfig
from signrec.synthetic import SyntheticCorpusConfig, generate_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_corpus")
    cfg = SyntheticCorpusConfig(num_signs=3, num_signers=3, samples_per_signer_per_sign=1,
                                frame_size=32, frames_min=4, frames_max=6, seed=5)
    generate_synthetic_corpus(cfg, out)
    return out


@pytest.fixture(scope="session")
def tiny_setup(tiny_corpus_dir):
    from signrec.manifest import load_manifest
    manifest = load_manifest(tiny_corpus_dir / "manifest.csv")
    split = build_signer_independent_split(manifest, {"signer02"}, 0.34, seed=0)
    loader = ClipLoader(manifest, DataConfig(frame_side=32))
    return manifest, split, loader


def tiny_model_config(variant="cnn_fpm_lstm_attn", **kw):
    base = dict(variant=variant, num_classes=3, hidden=8, fpm_branch_channels=4,
                backbone="standin", backbone_channels=16, standin_width=4, seed=0)
    base.update(kw)
    return ModelConfig(**base)


ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion with a summary label")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if call.when == "setup" and call.excinfo is not None:
        ACCEPTANCE_RESULTS[label] = "FAIL"
    elif call.when == "call":
        ACCEPTANCE_RESULTS[label] = "FAIL" if call.excinfo is not None else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome}  {label}")
