"""A walk through the evaluation metrics on hand-sized inputs.

Run with ``python demos/metrics_tour.py``. Everything here finishes in a
few seconds.
"""
import numpy as np

from stylelab.metrics import bleu, dc_emd, emd, sbleu, train_embeddings, train_lm, perplexity, wmd, wms

# Earth mover's distance between two style distributions, unit ground metric
p = np.array([0.0, 1.0])
q = np.array([1.0, 0.0])
print("emd([0,1], [1,0])          =", emd(p, q))
print("emd([.2,.3,.5],[.5,.3,.2]) =", round(emd([0.2, 0.3, 0.5], [0.5, 0.3, 0.2]), 6))

# direction-corrected: positive when the move is toward the target class
before = np.array([0.9, 0.1])
print("toward target 1  :", dc_emd(before, np.array([0.2, 0.8]), 1))
print("away from target :", dc_emd(before, np.array([0.95, 0.05]), 1))

# BLEU against references, and self-BLEU against the inputs
outputs = [["the", "food", "was", "great", "and", "fresh"]]
refs = [["the", "food", "was", "great", "and", "warm"]]
print("BLEU  =", round(bleu(outputs, refs), 2))
print("sBLEU =", round(sbleu(outputs, outputs), 2))

# a small corpus for embeddings and the language model
corpus = [s.split() for s in [
    "the food was great", "the food was awful", "the service was great",
    "the service was awful", "i loved the food", "i hated the service",
] * 20]
emb = train_embeddings(corpus, dim=16, epochs=20, seed=0)
a, b = "the food was great".split(), "the service was great".split()
print("WMD =", round(wmd(a, b, emb), 4), " WMS =", round(wms(a, b, emb), 4))

lm = train_lm(corpus, order=3)
print("PPL (in-domain) =", round(perplexity(lm, [["the", "food", "was", "great"]]), 3))
print("PPL (scrambled) =", round(perplexity(lm, [["great", "was", "food", "the"]]), 3))
