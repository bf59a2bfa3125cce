"""Question generation walkthrough: the word-count policy, the rule-based
generator, and the exact LLM prompt an endpoint would receive.

Run: python demos/02_question_generation.py
"""

from t2i_eval import Caption, build_llm_prompt, generate_rule_based, question_count

print("=== Question-count policy ===")
print("  words -> questions")
for words in [1, 2, 3, 8, 9, 14, 15, 20, 21, 50]:
    print(f"  {words:5} -> {question_count(words)}")

print("\n=== Rule-based generation (deterministic, offline) ===")
for text in ["dog", "blue car", "a red bird",
             "this bird has a red head and a white belly"]:
    caption = Caption.from_text("demo", text)
    questions = generate_rule_based(caption).questions
    print(f"  caption ({caption.word_count} words): {text!r}")
    for question in questions:
        print(f"    {question.text}")

print("\n=== The LLM prompt (for --qgen llm) ===")
caption = Caption.from_text("demo", "a small yellow bird with black wings")
n = question_count(caption.word_count)
print(build_llm_prompt(caption, n))
