#!/usr/bin/env python3
"""Offline mirror of the engine's hash embedder + BM25 + RRF, used only to
tune fixture wording. Not part of the build."""
import json
import math
import sys

DIM = 64


def tokenize(text):
    out, cur = [], []
    for ch in text:
        if ch.isalnum():
            cur.append(ch.lower())
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def fnv1a64(token):
    h = 0xCBF29CE484222325
    for b in token.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def embed(text):
    toks = tokenize(text)
    v = [0.0] * DIM
    for t in toks:
        h = fnv1a64(t)
        bucket = h % DIM
        sign = 1.0 if ((h >> 32) & 1) == 0 else -1.0
        v[bucket] += sign
    norm = math.sqrt(sum(x * x for x in v))
    if norm == 0:
        v[fnv1a64(toks[0]) % DIM] = 1.0
        return v
    return [x / norm for x in v]


def cos(a, b):
    return sum(x * y for x, y in zip(a, b))


def bm25_scores(docs, query, k1=1.2, b=0.75):
    doc_toks = {i: tokenize(t) for i, t in docs.items()}
    n = len(docs)
    avgdl = sum(len(t) for t in doc_toks.values()) / n
    scores = {}
    for i, toks in doc_toks.items():
        s = 0.0
        for term in tokenize(query):
            tf = toks.count(term)
            if tf == 0:
                continue
            df = sum(1 for t in doc_toks.values() if term in t)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avgdl))
        if s > 0:
            scores[i] = s
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def dense_scores(docs, query):
    q = embed(query)
    scores = {i: cos(q, embed(t)) for i, t in docs.items()}
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def rrf(lists, k=60):
    fused = {}
    for lst in lists:
        for rank, (i, _) in enumerate(lst, 1):
            fused[i] = fused.get(i, 0.0) + 1.0 / (rank + k)
    return sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))


def main():
    docs = {}
    with open(sys.argv[1] if len(sys.argv) > 1 else "corpus.jsonl") as f:
        for line in f:
            line = line.strip()
            if line:
                rec = json.loads(line)
                docs[rec["id"]] = rec["text"]
    query = sys.argv[2] if len(sys.argv) > 2 else "iron rich foods anemia pregnancy"
    sparse = bm25_scores(docs, query)
    dense = dense_scores(docs, query)[:15]
    fused = rrf([dense, sparse])
    print(f"query: {query}")
    print("BM25:", [(i, round(s, 3)) for i, s in sparse[:8]])
    print("DENSE:", [(i, round(s, 3)) for i, s in dense[:8]])
    print("FUSED:", [(i, round(s, 5)) for i, s in fused[:8]])
    bm25_top5 = {i for i, _ in sparse[:5]}
    dense_top5 = {i for i, _ in dense[:5]}
    fused_top5 = {i for i, _ in fused[:5]}
    lex, sem = "c13", "c07"
    print(f"lexical plant {lex}: bm25_top5={lex in bm25_top5} dense_top5={lex in dense_top5} fused_top5={lex in fused_top5}")
    print(f"semantic plant {sem}: bm25_top5={sem in bm25_top5} dense_top5={sem in dense_top5} fused_top5={sem in fused_top5}")
    ok = (
        lex in fused_top5
        and sem in fused_top5
        and not (lex in bm25_top5 and sem in bm25_top5)
        and not (lex in dense_top5 and sem in dense_top5)
    )
    print("criterion conditions:", "OK" if ok else "FAIL")


if __name__ == "__main__":
    main()
