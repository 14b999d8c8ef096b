#!/usr/bin/env python3
"""Per-stage binding check: negated examples vs the bank of their inferred
stage (stage inference approximated with the same regexes as the pack)."""
import json
import re
from mirror import embed, cos

stage_rules = []
with open("stage_patterns.jsonl") as f:
    for line in f:
        if line.strip():
            rec = json.loads(line)
            if "pattern" in rec:
                stage_rules.append((re.compile(rec["pattern"], re.I), rec["stage"]))


def infer_stage(q):
    matched = {s for rx, s in stage_rules if rx.search(q)}
    if "newborn" in matched:
        return "newborn"
    if "postpartum" in matched:
        return "postpartum"
    return "maternal_pregnant"


bank = {}
with open("symptom_bank.jsonl") as f:
    for line in f:
        if line.strip():
            rec = json.loads(line)
            bank.setdefault(rec["stage"], []).append(
                (rec["canonical_text"], embed(rec["canonical_text"]))
            )

queries = []
with open("triage_rules.jsonl") as f:
    for line in f:
        if line.strip():
            rec = json.loads(line)
            if rec["level"] == "EMERGENCY_NOW":
                queries.append(("no " + rec["example"], rec["id"]))
queries.append(("Mild back pain at 24 weeks", "pass-row-6"))
queries.append(("What foods increase iron?", "pass-row-7"))

rows = []
for q, qid in queries:
    stage = infer_stage(q)
    qv = embed(q)
    sim, text = max(((cos(qv, bv), t) for t, bv in bank[stage]), key=lambda x: x[0])
    rows.append((sim, qid, stage, q, text))

rows.sort(reverse=True)
for sim, qid, stage, q, text in rows:
    flag = "FAIL" if sim >= 0.30 else ("WARN" if sim >= 0.27 else "ok")
    print(f"{flag} {sim:.3f} [{qid}:{stage}] {q!r} ~ {text!r}")
