"""
Character n-grams of transcribed calls
======================================

Phonetic transcriptions of calls ("Mmrrr", "moo") can be summarised by their
most frequent character n-grams. Counting stays inside whitespace-delimited
tokens, ignores case and drops anything that is not a letter.

Run with ``python demos/03_transcript_ngrams.py``.
"""

from herdsig.textstats import merge, ngram_counts, top_k

# Two short transcripts, as if from two recording sessions.
sessions = [
    "Mmrrr mrr... MOO! mmrr rrm",
    "moo-oo mmmrr Rrrr mrrm oo",
]

# Bigrams per session, then the merged table. Merging equals counting the
# concatenated text, because no gram crosses a token boundary.
tables = [ngram_counts(text, 2) for text in sessions]
merged = merge(tables)
assert merged == ngram_counts(" ".join(sessions), 2)

for i, table in enumerate(tables, 1):
    print(f"session {i}: " + ", ".join(f"{g} {c}" for g, c in top_k(table, 4).entries))
print("all:       " + ", ".join(f"{g} {c}" for g, c in top_k(merged, 4).entries))

# Unigrams show the letter inventory behind those bigrams.
letters = ngram_counts(" ".join(sessions), 1)
print("letters:   " + ", ".join(f"{g} {c}" for g, c in letters.entries))

# The table serialises to CSV and to an SVG bar chart.
print()
print(top_k(merged, 3).to_csv(), end="")
