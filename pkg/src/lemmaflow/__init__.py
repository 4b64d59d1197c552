"""Lemma-structured verification of natural-language math solutions.

A solution is forced into a block grammar (variables, lemmas with
premises and a single conclusion, a goal), each fact and lemma is
formalized and proven against a proof-assistant backend, and the lemma
hypergraph is linked into one compiling proof.  Runs fully automatic or
with human adjudication at each failure point.
"""

__version__ = "0.1.0"
