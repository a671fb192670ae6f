"""Score utterance pairs and see which cross the similarity threshold.

The middle pair shares the long span "be using my card", pushing its score
past 0.3; the other two only share the bigram "my card" and land near 0.13.
"""
from cgsplit import RougeConfig, rouge_l, tokenize
from cgsplit.rouge import lcs_length

TRAIN = "Someone might be using my card that is not me."
TESTS = [
    "I don't recognize some of the transactions on my card, I think someone must have "
    "gotten my card info and used it.",
    "What should I do if I think that someone else may be using my card.",
    "I think someone got my card details and used it because there are transactions i "
    "don't recognize. What do I do now?",
]

cfg = RougeConfig(threshold=0.3)
a = tokenize(TRAIN)
print(f"train instance : {TRAIN}")
print(f"tokens ({len(a)}): {' '.join(a)}\n")

for text in TESTS:
    b = tokenize(text)
    lcs = lcs_length(a, b)
    score = rouge_l(a, b, cfg)
    marker = "SIMILAR " if score >= cfg.threshold else "distinct"
    print(f"[{marker}] score {score:.2f}  (lcs {lcs:2d}, max len {max(len(a), len(b)):2d})  {text[:60]}...")

print("\nscores are symmetric and live in [0, 1]; 1.0 means identical token sequences:")
print(f"  rouge_l(a, a) = {rouge_l(a, a, cfg):.2f}")
print(f"  rouge_l(b, a) = {rouge_l(tokenize(TESTS[1]), a, cfg):.2f}")

f1 = RougeConfig(variant="lcs_f1", threshold=0.3)
print(f"\nthe lcs_f1 variant weighs both lengths: {rouge_l(a, tokenize(TESTS[1]), f1):.2f}")
