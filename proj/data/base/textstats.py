import re
from collections import Counter

WORD = re.compile(r"[A-Za-z']+")


def words(text):
    return [w.lower() for w in WORD.findall(text)]


def top_words(text, n=5):
    counts = Counter(words(text))
    return counts.most_common(n)


def average_length(text):
    items = words(text)
    if not items:
        return 0.0
    return sum(len(w) for w in items) / len(items)


def summarize(text):
    lines = text.splitlines()
    return {
        "lines": len(lines),
        "words": len(words(text)),
        "average": round(average_length(text), 2),
    }
