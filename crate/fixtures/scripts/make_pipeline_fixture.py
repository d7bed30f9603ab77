"""Turns the toy explanation corpus into recorded fact-check API pages,
article pages, search results and simulated judgments for the toy pipeline."""
import hashlib
import html
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "pipeline"
SITES = {"fullfact": "fullfact.org", "bbc": "bbc.co.uk", "factcheck": "factcheck.org"}

records = [json.loads(line) for line in open(ROOT / "toy_explanations.jsonl")]
rng = random.Random(11)


def review_url(r):
    return f"https://www.{SITES[r['publisher']]}/checks/{r['id']}/"


def record_id(claim, url, publisher):
    digest = hashlib.sha256(claim.encode() + b"\0" + url.encode()).hexdigest()
    return f"{publisher}-{digest[:12]}"


pages = {p: [] for p in SITES}
for n, r in enumerate(records):
    review = {
        "publisher": {"name": r["publisher"], "site": SITES[r["publisher"]]},
        "url": review_url(r),
        "languageCode": "en",
    }
    if r["publisher"] == "factcheck":
        review["title"] = r["explanation"]
        review["textualRating"] = r["verdict"]
    else:
        review["title"] = f"Fact check: {r['claim']}"
        review["textualRating"] = r["explanation"]
    claim = {
        "text": r["claim"],
        "claimant": "Social media",
        "claimDate": f"2022-{n % 12 + 1:02d}-{n % 27 + 1:02d}T00:00:00Z",
        "claimReview": [review],
    }
    pages[r["publisher"]].append(claim)

for publisher, claims in pages.items():
    half = (len(claims) + 1) // 2
    body = [{"claims": claims[:half]}, {"claims": claims[half:]}]
    if publisher == "bbc":
        body[0]["claims"].append({"claimReview": [{"url": "https://www.bbc.co.uk/x"}]})
    with open(OUT / "factcheck" / f"{publisher}.json", "w") as f:
        json.dump(body, f, indent=1)
        f.write("\n")

with open(OUT / "pages.jsonl", "w") as f:
    for r in records:
        paragraphs = [s.strip() + "." for s in r["article"].split(". ") if s.strip()]
        paras = "".join(f"<p>{html.escape(p.rstrip('.') + '.')}</p>" for p in paragraphs)
        page = (
            "<html><body><nav><p><a href='/'>Home</a></p></nav>"
            f"<article>{paras}</article>"
            "<footer><p>Contact us</p></footer></body></html>"
        )
        f.write(json.dumps({"url": review_url(r), "html": page}) + "\n")

with open(OUT / "search.jsonl", "w") as f:
    for r in records:
        sentences = [s for s in r["article"].split(". ") if s]
        hits = [{"snippet": r["claim"], "url": review_url(r)}]
        hits += [
            {"snippet": s.rstrip("."), "url": f"https://news.example.org/{r['id']}/{i}"}
            for i, s in enumerate(sentences[:3])
        ]
        f.write(json.dumps({"claim": r["claim"], "hits": hits}) + "\n")

ids = [record_id(r["claim"], review_url(r), r["publisher"]) for r in records]
annotators = ["ann-1", "ann-2", "ann-3", "ann-4"]
judgments, responses = [], []
minute = 0
for sid in ids:
    truth = [rng.random() < 0.5 for _ in range(4)]
    base_quality = rng.choice([0.25, 0.5, 0.75])
    for ann in rng.sample(annotators, 3):
        answers = [t if rng.random() < 0.85 else not t for t in truth]
        quality = min(1.0, max(0.0, base_quality + rng.choice([-0.25, 0.0, 0.0, 0.25])))
        judgments.append({
            "summary_id": sid, "annotator_id": ann,
            "q1": answers[0], "q2": answers[1], "q3": answers[2], "q4": answers[3],
            "quality": quality, "ts": f"2023-06-01T09:{minute // 60:02d}:{minute % 60:02d}Z",
        })
        minute += 1
    for dim in ["article_contradiction", "self_contradiction", "hallucination"]:
        responses.append({"summary_id": sid, "dimension": dim, "response": "Yes" if rng.random() < 0.5 else "No"})

with open(OUT / "judgments.jsonl", "w") as f:
    for j in judgments:
        f.write(json.dumps(j) + "\n")
with open(OUT / "adjudicator.jsonl", "w") as f:
    for r in responses:
        f.write(json.dumps(r) + "\n")

seq2seq = {
    "family": "seq2seq-tiny", "vocab_size": 0, "d_model": 32, "heads": 2, "d_ff": 64,
    "encoder_layers": 1, "decoder_layers": 1, "dropout": 0.0, "max_positions": 512,
    "attention_window": None,
}
encoder = {
    "family": "encoder-tiny", "vocab_size": 0, "d_model": 32, "heads": 2, "d_ff": 64,
    "layers": 1, "dropout": 0.0, "max_positions": 256, "head": "binary_classifier",
}
json.dump(seq2seq, open(OUT / "seq2seq-tiny.json", "w"), indent=2)
json.dump(encoder, open(OUT / "encoder-tiny.json", "w"), indent=2)
json.dump(dict(encoder, family="encoder-tiny-wide", d_model=48, d_ff=96, heads=3), open(OUT / "encoder-tiny-wide.json", "w"), indent=2)
print(len(ids), "records;", len(judgments), "judgments")
