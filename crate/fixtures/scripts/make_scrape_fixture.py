"""Writes an article page whose main text is 1800 characters and counts the
extracted text back with html.parser (paragraphs of the <article> element,
whitespace collapsed, one paragraph per line)."""
import json
from html.parser import HTMLParser
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scrape"
TARGET = 1800

sentences = [
    "The claim that the council cut library funding by half is not supported by its published accounts.",
    "Budget papers show spending on libraries fell from 4.1 million pounds to 3.7 million pounds over two years.",
    "That is a reduction of roughly ten percent, not fifty percent as the post suggests.",
    "Two branches did reduce their opening hours, and one mobile library service was merged with a neighbouring area.",
    "A council spokesperson said no branches had closed and staffing levels were broadly unchanged.",
    "The figure of half appears to come from a proposal that was consulted on in 2019 but never adopted.",
    "Local campaign groups have raised concerns about future budgets, which remain under review.",
    "We contacted the author of the post for comment but did not receive a reply before publication.",
]

paragraphs, total = [], 0
i = 0
while True:
    s = sentences[i % len(sentences)]
    extra = len(s) + (1 if paragraphs else 0)
    if total + extra > TARGET:
        break
    paragraphs.append(s)
    total += extra
    i += 1
gap = TARGET - total - 1
assert gap > 10
paragraphs.append(("Update: " + "the accounts were rechecked in full. " * 20)[:gap].rstrip() or "x")
while sum(map(len, paragraphs)) + len(paragraphs) - 1 < TARGET:
    paragraphs[-1] += "."

body = "\n".join(f"      <p>{p.replace('  ', ' &nbsp;')}</p>" for p in paragraphs)
html = f"""<!DOCTYPE html>
<html>
  <head><title>Library funding claim</title><style>p {{ margin: 0; }}</style></head>
  <body>
    <header><p>Site header with a tagline</p></header>
    <nav class="site-nav"><p><a href="/">Home</a> <a href="/health">Health</a></p></nav>
    <main>
      <article class="entry-content">
{body}
      </article>
      <div class="share-links"><p>Share this fact check on social media</p></div>
      <section id="comments"><p>Reader comment: I always thought the cut was bigger than this.</p></section>
      <div class="related"><p><a href="/a">Related article one</a></p></div>
    </main>
    <footer><p>Copyright notice and contact details</p></footer>
    <script>var tracking = "<p>not text</p>";</script>
  </body>
</html>
"""


class ArticleText(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.depth = 0
        self.in_p = False
        self.current = []
        self.paragraphs = []

    def handle_starttag(self, tag, attrs):
        if tag == "article":
            self.depth += 1
        elif tag == "p" and self.depth:
            self.in_p = True
            self.current = []

    def handle_endtag(self, tag):
        if tag == "article":
            self.depth -= 1
        elif tag == "p" and self.in_p:
            self.in_p = False
            text = " ".join("".join(self.current).split())
            if text:
                self.paragraphs.append(text)

    def handle_data(self, data):
        if self.in_p:
            self.current.append(data)


parser = ArticleText()
parser.feed(html)
extracted = "\n".join(parser.paragraphs)
assert len(extracted) == TARGET, len(extracted)

OUT.mkdir(parents=True, exist_ok=True)
url = "https://fullfact.org/economy/library-funding/"
with open(OUT / "pages.jsonl", "w") as f:
    f.write(json.dumps({"url": url, "html": html}) + "\n")
    f.write(json.dumps({"url": "https://fullfact.org/gone/", "status": 404, "html": "not found"}) + "\n")
with open(OUT / "expected.json", "w") as f:
    json.dump({"url": url, "char_count": len(extracted), "body_text": extracted}, f, indent=2)
    f.write("\n")
print("extracted", len(extracted), "chars in", len(parser.paragraphs), "paragraphs")
