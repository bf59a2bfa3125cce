"""End-to-end offline evaluation: a small caption dataset with attribute
tables, the oracle VQA + sidecar IQA mocks, and a rendered markdown report.
No network, fully deterministic.

Run: python demos/04_offline_eval_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from t2i_eval.cli import main

DATASET = [
    {"image_id": "bird", "image_path": "bird.png",
     "caption": "a red bird with a yellow beak",
     "attributes": ["red", "bird", "yellow", "beak"]},
    {"image_id": "dog", "image_path": "dog.png",
     "caption": "a small dog on green grass",
     "attributes": ["small", "dog", "green", "grass"]},
    {"image_id": "mismatch", "image_path": "mismatch.png",
     "caption": "a purple elephant on green grass",      # "purple elephant" is not true
     "attributes": ["small", "dog", "green", "grass"]},
]


def write_photo(path: Path, seed: int) -> None:
    import numpy as np

    from t2i_eval.degrade import save_png

    rng = np.random.default_rng(seed)
    img = rng.integers(0, 255, (64, 64, 3)).astype("uint8")
    save_png(img, path)


with tempfile.TemporaryDirectory() as work:
    work = Path(work)
    for i, row in enumerate(DATASET):
        write_photo(work / row["image_path"], seed=i)
    dataset = work / "dataset.jsonl"
    dataset.write_text("".join(json.dumps(row) + "\n" for row in DATASET))

    code = main([
        "eval",
        "--dataset", str(dataset),
        "--qgen", "rule",
        "--vqa", "mock:oracle",
        "--iqa", "mock:sidecar",
        "--w-tia", "0.5", "--w-iqa", "0.5",
        "--format", "markdown",
        "--out", str(work / "out"),
    ])
    print(f"\nexit code: {code}\n")
    print((work / "out" / "report.md").read_text())
    print("run log (timestamps live here, never in the report):")
    print((work / "out" / "run.log").read_text())
