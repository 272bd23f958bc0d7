"""
Synthetic corpus and signer-independent splits
==============================================

Generate the toy gesture corpus, look at what a class is made of, and build
a split in which the test signers never appear in training.
"""

import sys
import tempfile
from collections import Counter
from pathlib import Path

from signrec.manifest import build_balanced_test, build_signer_independent_split
from signrec.preprocessing import decode_clip
from signrec.synthetic import SyntheticCorpusConfig, generate_synthetic_corpus, sign_name

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())

# Ten classes: five loop shapes, each traced once or twice. Paired classes
# differ only in how often the loop is repeated.
config = SyntheticCorpusConfig(num_signs=10, num_signers=5, samples_per_signer_per_sign=2, seed=0)
manifest = generate_synthetic_corpus(config, out)
print(f"{len(manifest)} clips written under {out}")
for k in range(manifest.num_signs):
    print(f"  class {k}: {sign_name(k)}")

# Each clip is a directory of numbered frames; depth is a 16-bit image in mm.
rec = manifest.records[0]
rgb, depth = decode_clip(rec, "rgb"), decode_clip(rec, "depth")
print(f"{rec.sample_id}: rgb {rgb.data.shape}, depth {depth.data.shape}, "
      f"depth range {depth.data.min():.0f}..{depth.data.max():.0f} mm")

# Hold out one signer for testing; the validation set is drawn per training signer.
split = build_signer_independent_split(manifest, {"signer04"}, val_fraction=0.2, seed=0)
print(f"train {len(split.train_ids)}, val {len(split.val_ids)}, test {len(split.test_ids)}")
print("test signers:", sorted({manifest[s].signer_id for s in split.test_ids}))

# With several test signers of unequal size the balanced subset evens them out.
split3 = build_signer_independent_split(manifest, {"signer02", "signer03", "signer04"}, 0.2, seed=0)
balanced = build_balanced_test(manifest, split3, seed=0)
print("balanced test counts per signer:", dict(Counter(manifest[s].signer_id for s in balanced)))
