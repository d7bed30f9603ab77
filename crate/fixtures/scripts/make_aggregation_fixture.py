"""Builds the 50-summary aggregation fixture and its expected output.

The expected file is computed here with a separate implementation of peer
agreement, strict threshold filtering, majority voting and tie handling.
"""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "aggregation"
DIMS = ["article_contradiction", "self_contradiction", "hallucination", "convincingness"]
KEYS = ["q1", "q2", "q3", "q4"]
OBJECTIVE = DIMS[:3]
THRESHOLD = 0.6
GOOD = ["ann-a", "ann-b", "ann-c", "ann-d", "ann-e"]
NOISY = "ann-z"

rng = random.Random(7)
summaries, judgments, responses = [], [], []
planned_ties = {}


def judgment(sid, ann, answers, quality, minute):
    rec = {"summary_id": sid, "annotator_id": ann}
    rec.update(dict(zip(KEYS, answers)))
    rec["quality"] = quality
    rec["ts"] = f"2023-05-01T10:{minute // 60:02d}:{minute % 60:02d}Z"
    return rec


minute = 0
for i in range(50):
    sid = f"sum-{i:03d}"
    summaries.append({
        "summary_id": sid,
        "claim": f"Claim number {i} about public spending.",
        "verdict": "False.",
        "article": f"Article {i} explains the official figures in detail.",
        "explanation": f"False. The figures for case {i} were misread.",
    })
    truth = [rng.random() < 0.4 for _ in DIMS]
    qualities = [rng.choice([0.25, 0.5, 0.75, 1.0]) for _ in range(3)]
    if i < 20:
        anns = rng.sample(GOOD, 3)
        rows = [list(truth) for _ in anns]
        if i % 4 == 0:
            rows[2][i % 4] = not rows[2][i % 4]
    else:
        anns = rng.sample(GOOD, 2) + [NOISY]
        rows = [list(truth), list(truth), [not t for t in truth]]
        if i % 3 == 0:
            # the two kept annotators split on one dimension
            d = (i // 3) % 4
            rows[1][d] = not rows[1][d]
            planned_ties[sid] = DIMS[d]
    for ann, row, q in zip(anns, rows, qualities):
        judgments.append(judgment(sid, ann, row, q, minute))
        minute += 1

# adjudicator script for planned objective ties: mostly clean answers, one
# unparseable reply and one missing recording
objective_ties = sorted((s, d) for s, d in planned_ties.items() if d in OBJECTIVE)
for n, (sid, dim) in enumerate(objective_ties):
    if n == 1:
        responses.append({"summary_id": sid, "dimension": dim, "response": "It is hard to say."})
    elif n == 2:
        continue
    else:
        word = "Yes" if n % 2 == 0 else "No"
        responses.append({"summary_id": sid, "dimension": dim, "response": f"{word}. Based on the article."})


# --- independent oracle ---------------------------------------------------
def agreement_profiles(records):
    groups = {}
    for r in records:
        groups.setdefault(r["summary_id"], []).append(r)
    totals = {}
    for group in groups.values():
        for r in group:
            peers = [p for p in group if p["annotator_id"] != r["annotator_id"]]
            if not peers:
                continue
            for key in KEYS:
                same = sum(1 for p in peers if p[key] == r[key])
                s, c = totals.get(r["annotator_id"], (0.0, 0))
                totals[r["annotator_id"]] = (s + same / len(peers), c + 1)
    return {a: s / c for a, (s, c) in totals.items()}


profiles = agreement_profiles(judgments)
kept = {a for a, v in profiles.items() if v > THRESHOLD}
assert NOISY not in kept and set(GOOD) <= kept, profiles
pool = [r for r in judgments if r["annotator_id"] in kept]

answers = {}
for r in responses:
    first = "".join(ch if ch.isalnum() else " " for ch in r["response"]).split()
    word = first[0].lower() if first else ""
    if word in ("yes", "true"):
        answers[(r["summary_id"], r["dimension"])] = True
    elif word in ("no", "false"):
        answers[(r["summary_id"], r["dimension"])] = False

labels, unresolved = {}, {}
by_summary = {}
for r in pool:
    by_summary.setdefault(r["summary_id"], []).append(r)
for sid in sorted(by_summary):
    group = by_summary[sid]
    entry = {"summary_id": sid, "binary_labels": {}, "quality_score": None, "tie_broken_by_adjudicator": []}
    for dim, key in zip(DIMS, KEYS):
        yes = sum(1 for r in group if r[key])
        no = len(group) - yes
        if yes != no:
            entry["binary_labels"][dim] = yes > no
        elif dim in OBJECTIVE and (sid, dim) in answers:
            entry["binary_labels"][dim] = answers[(sid, dim)]
            entry["tie_broken_by_adjudicator"].append(dim)
        else:
            unresolved[dim] = unresolved.get(dim, 0) + 1
    values = sorted(r["quality"] for r in group)
    total = 0.0
    for v in values:
        total += v
    entry["quality_score"] = total / len(values)
    labels[sid] = entry

expected = {
    "labels": [labels[s] for s in sorted(labels)],
    "unresolved_ties": {d: unresolved[d] for d in DIMS if d in unresolved},
}
assert len(expected["labels"]) == 50
assert sum(len(l["tie_broken_by_adjudicator"]) for l in expected["labels"]) == len(responses) - 1

OUT.mkdir(parents=True, exist_ok=True)
for name, rows in [("judgments.jsonl", judgments), ("summaries.jsonl", summaries), ("adjudicator.jsonl", responses)]:
    with open(OUT / name, "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
with open(OUT / "expected.json", "w") as f:
    json.dump(expected, f, indent=2)
    f.write("\n")
with open(OUT / "profiles.json", "w") as f:
    json.dump({"threshold": THRESHOLD, "overall_agreement": dict(sorted(profiles.items()))}, f, indent=2)
    f.write("\n")
print(len(judgments), "judgments;", len(planned_ties), "planned ties;", expected["unresolved_ties"])
