"""Scoring arithmetic walkthrough: answer normalization, yes-rate TIA, and the
weighted final score.

Run: python demos/01_scoring_basics.py
"""

from t2i_eval import IqaScore, Weights, combine, normalize_answer, score_tia

print("=== Answer normalization ===")
for raw in ["Yes", "yes, it is.", "no", "maybe", "", "Yes the bird is red"]:
    print(f"  {raw!r:28} -> {normalize_answer(raw).value}")

print("\n=== TIA: the yes-rate over a question set ===")
answers = [normalize_answer(a) for a in ["Yes", "yes.", "No", "yes"]]
tia = score_tia(answers)
print(f"  answers {[a.value for a in answers]} -> {tia.yes_count}/{tia.total} = {tia.value}")

print("\n=== Final score: weighted combination ===")
iqa = IqaScore.from_raw(0.62, backend_id="demo-iqa")
for weights in [Weights(), Weights(1.0, 0.0), Weights(0.0, 1.0), Weights(0.8, 0.2)]:
    final = combine(tia, iqa, weights)
    print(f"  w_tia={weights.w_tia:<4} w_iqa={weights.w_iqa:<4} -> "
          f"{tia.value} * {weights.w_tia} + {iqa.value} * {weights.w_iqa} = {final.value:.4f}")

print("\nEndpoint weights return a sub-score exactly, so alignment and quality")
print("can always be read off separately no matter how they are mixed.")
