"""
Cosine similarity and token F1
==============================

Both metrics share one embedder. With the hashing embedder every token is a
one-hot bucket, so the numbers can be checked by hand.
"""

import numpy as np

from convrewrite import HashEmbedder, bert_f1, cosine_similarity, score_question

emb = HashEmbedder()
gold = "compare orders by country"
pred = "compare orders by top-5 countries as bar"

# 3 shared tokens, 4 in the gold and 8 in the prediction
print(cosine_similarity(emb.embed(gold), emb.embed(pred)), 3 / np.sqrt(4 * 8))

s = bert_f1(pred, gold, emb)
print(f"P={s.precision:.3f} R={s.recall:.3f} F1={s.f1:.3f}")

###############################################################################
# An empty prediction is scored 0 and flagged rather than raising.

print(score_question(gold, "", emb))
