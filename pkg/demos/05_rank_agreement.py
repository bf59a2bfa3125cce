"""Rank agreement walkthrough: how metric scores are compared against
ground-truth orderings with Kendall tau-b, the way matched-vs-perturbed
captions and degradation ladders are judged.

Run: python demos/05_rank_agreement.py
"""

from t2i_eval.harness import kendall_tau_b

EXAMPLES = [
    ("perfect ordering", [0.9, 0.6, 0.3]),
    ("one swap", [0.9, 0.3, 0.6]),
    ("reversed", [0.3, 0.6, 0.9]),
    ("ties everywhere", [0.5, 0.5, 0.5]),
]

print("Ground truth: rank 1 should score highest, rank 3 lowest.\n")
print(f"{'scores by gt rank':>24}   tau-b")
for label, scores in EXAMPLES:
    inverse_ranks = [-r for r in range(1, len(scores) + 1)]
    tau = kendall_tau_b(scores, inverse_ranks)
    print(f"{str(scores):>24}   {tau:+.3f}   ({label})")

print("""
tau-b is the agreement statistic because the claim under test is ordinal
("scores decrease as alignment decreases", "scores decrease as quality
degrades"), not about score magnitudes. Ties in the metric reduce tau toward
zero instead of counting as agreement; an all-tied metric gets 0.0.

The compare command renders one tau per (case, metric) pair:

  t2i-eval compare --cases cases.jsonl \\
      --vqa mock:oracle --iqa mock:sidecar \\
      --baseline flat=mock:fixed=0.5 \\
      --out out --format markdown
""")
