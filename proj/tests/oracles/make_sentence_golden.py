"""Builds tests/data/sentences_golden.jsonl.

Ground truth is fixed by construction: each document is the space-joined
concatenation of known sentences, so the expected split is the list the
document was assembled from. The pool mixes plain sentences with the hard
cases a Punkt-style splitter handles (abbreviations, initials, decimals,
quotes, repeated terminators).
"""
import json
import random
import sys

subjects = ["The company", "Dr. Smith", "Mr. Jones", "Officials in the U.S. capital", "The St. Louis team",
            "Prof. Adams", "Mrs. Brown", "The board of Acme Inc.", "Analysts at Foo Ltd.", "J. R. Tolkien",
            "The mayor", "Investors", "The senator", "Sen. Miller", "Gov. Reyes", "Researchers",
            "The Yankees", "Shoppers", "The central bank", "Our neighbors"]
predicates = ["reported strong earnings", "arrived late on Monday", "rejected the offer",
              "said prices rose 3.5 percent", "met with Dr. Lee", "compared apples vs. oranges",
              "moved to No. 5 in the rankings", "bought fruit, e.g. apples and pears",
              "visited the U.S. Senate", "paid $2.50 per share", "wrote about co. founders",
              "cited a 1.2 billion dollar deal"]
endings = [".", "!", "?", ".", "."]

rng = random.Random(20240601)
pool = []
for s in subjects:
    for p in predicates:
        e = rng.choice(endings)
        # "Inc." / "Ltd." already end a subject; predicates never end in an
        # abbreviation so the final terminator is unambiguous.
        pool.append(f"{s} {p}{e}")
rng.shuffle(pool)
pool = pool[:180]
pool += [
    "He said \"Go home.\"",
    "Why not?!",
    "Wait...",
    "2004 was a good year.",
    "\"Really?\" she asked.",
    "It works (mostly.)",
    "Prices fell 2.5 percent in the U.S. market.",
    "Wall St. Bears Claw Back Into the Black.",
    "E.g. fruit is healthy.",
    "The vote was 5 vs. 4 in favor.",
    "I came.",
    "I saw.",
    "I left.",
    "Great!",
    "Dr. Smith arrived.",
    "He left.",
    "Is this the No. 1 pick?",
    "Ask Mr. T. Jones about it.",
    "3 people attended.",
    "The end.",
]
assert len(pool) == 200, len(pool)
# Keep the hand-written tail contiguous, the rest randomly grouped.
docs = []
i = 0
while i < len(pool):
    n = rng.randint(1, 6)
    docs.append(pool[i:i + n])
    i += n
with open(sys.argv[1], "w") as f:
    for d in docs:
        f.write(json.dumps({"text": " ".join(d), "sentences": d}) + "\n")
print(f"{len(docs)} documents, {sum(len(d) for d in docs)} sentences")
