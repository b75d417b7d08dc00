"""Reference values for the toy caption corpus.

BLEU comes from NLTK's corpus_bleu. ROUGE-L and base CIDEr (tf-idf cosine
without the clipping and length penalty of CIDEr-D) are computed directly
below. Tokens are lowercased with ASCII punctuation deleted, then split on
whitespace.

    pip install nltk
    python3 tools/metric_oracle.py fixtures/eval/toy_corpus.jsonl > fixtures/eval/toy_expected.json
"""

import json
import math
import string
import sys
from collections import Counter

from nltk.translate.bleu_score import corpus_bleu

BETA = 1.2


def tokens(text):
    return text.lower().translate(str.maketrans("", "", string.punctuation)).split()


def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[len(a)][len(b)]


def rouge_l(cand, refs):
    best = 0.0
    for ref in refs:
        m = lcs(cand, ref)
        if m == 0:
            continue
        p, r = m / len(cand), m / len(ref)
        best = max(best, (1 + BETA**2) * p * r / (r + BETA**2 * p))
    return best


def ngram_counts(toks):
    counts = Counter()
    for n in range(1, 5):
        for i in range(len(toks) - n + 1):
            counts[tuple(toks[i : i + n])] += 1
    return counts


def cider(cands, refs):
    df = Counter()
    for rs in refs:
        df.update(set(g for r in rs for g in ngram_counts(r)))
    log_n = math.log(len(cands))

    def vector(toks):
        vec = [{} for _ in range(4)]
        for gram, tf in ngram_counts(toks).items():
            vec[len(gram) - 1][gram] = tf * (log_n - math.log(max(1.0, df[gram])))
        return vec

    def cos(a, b):
        dot = sum(w * b.get(g, 0.0) for g, w in a.items())
        na = math.sqrt(sum(w * w for w in a.values()))
        nb = math.sqrt(sum(w * w for w in b.values()))
        return dot / (na * nb) if na and nb else 0.0

    scores = []
    for c, rs in zip(cands, refs):
        vc = vector(c)
        total = 0.0
        for r in rs:
            vr = vector(r)
            total += sum(cos(vc[n], vr[n]) for n in range(4)) / 4
        scores.append(10.0 * total / len(rs))
    return sum(scores) / len(scores), scores


def main(path):
    items = [json.loads(line) for line in open(path) if line.strip()]
    cands = [tokens(it["candidate"]) for it in items]
    refs = [[tokens(r) for r in it["references"]] for it in items]

    bleu = {}
    for n in range(1, 5):
        weights = tuple([1.0 / n] * n)
        bleu[f"BLEU-{n}"] = corpus_bleu(refs, cands, weights=weights)

    rouge = [rouge_l(c, rs) for c, rs in zip(cands, refs)]

    cider_mean, cider_items = cider(cands, refs)

    out = {
        **bleu,
        "ROUGE-L": sum(rouge) / len(rouge),
        "CIDEr": cider_mean,
        "rouge_l_items": rouge,
        "cider_items": cider_items,
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1])
