#!/usr/bin/env python3
"""Tuning aid: cosine of negated rule examples / PASS queries against the
symptom bank under the hash embedder. Not part of the build."""
import json
from mirror import embed, cos

bank = []
with open("symptom_bank.jsonl") as f:
    for line in f:
        if line.strip():
            rec = json.loads(line)
            bank.append((rec["stage"], rec["canonical_text"], embed(rec["canonical_text"])))

queries = []
with open("triage_rules.jsonl") as f:
    for line in f:
        if line.strip():
            rec = json.loads(line)
            if rec["level"] == "EMERGENCY_NOW":
                queries.append(("no " + rec["example"], rec["id"]))
queries.append(("Mild back pain at 24 weeks", "pass-row-6"))
queries.append(("What foods increase iron?", "pass-row-7"))

worst = []
for q, qid in queries:
    qv = embed(q)
    best = max(((cos(qv, bv), stage, text) for stage, text, bv in bank), key=lambda x: x[0])
    worst.append((best[0], qid, q, best[1], best[2]))

worst.sort(reverse=True)
for sim, qid, q, stage, text in worst:
    flag = "FAIL" if sim >= 0.30 else ("WARN" if sim >= 0.25 else "ok")
    print(f"{flag} {sim:.3f} [{qid}] {q!r} ~ ({stage}) {text!r}")
