"""Character n-gram counts over call transcripts."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass

from .plots import bar_chart


@dataclass(frozen=True)
class NgramTable:
    """``entries`` sorted by count descending, then gram ascending."""

    n: int
    entries: tuple

    def __len__(self):
        return len(self.entries)

    def as_dict(self) -> dict:
        return dict(self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("gram", "count"))
        w.writerows(self.entries)
        return buf.getvalue()

    def to_svg(self, title: str = "") -> str:
        grams = [g for g, _ in self.entries]
        counts = [c for _, c in self.entries]
        return bar_chart(grams, counts, title or f"Top {len(self.entries)} character {self.n}-grams")


def _ordered(counter: Counter) -> tuple:
    return tuple(sorted(((g, int(c)) for g, c in counter.items() if c > 0),
                        key=lambda e: (-e[1], e[0])))


def tokens(text: str):
    """Lowercased whitespace tokens reduced to their alphabetic characters."""
    for tok in text.lower().split():
        kept = "".join(ch for ch in tok if ch.isalpha())
        if kept:
            yield kept


def count_ngrams(text: str, n: int) -> Counter:
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    c = Counter()
    for tok in tokens(text):
        c.update(tok[i:i + n] for i in range(len(tok) - n + 1))
    return c


def ngram_counts(text: str, n: int) -> NgramTable:
    """Overlapping character n-grams inside each token; none span two tokens."""
    return NgramTable(n, _ordered(count_ngrams(text, n)))


def merge(tables) -> NgramTable:
    """Entry-wise sum of tables of the same order."""
    tables = list(tables)
    if not tables:
        raise ValueError("nothing to merge")
    n = tables[0].n
    total = Counter()
    for t in tables:
        if t.n != n:
            raise ValueError("cannot merge tables of different order")
        total.update(dict(t.entries))
    return NgramTable(n, _ordered(total))


def top_k(table: NgramTable, k: int) -> NgramTable:
    if k < 1:
        raise ValueError("k must be at least 1")
    return NgramTable(table.n, table.entries[:k])
