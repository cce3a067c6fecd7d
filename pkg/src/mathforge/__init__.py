"""Committee-driven math data synthesis and preference-pair construction.

Stages: a rotating examiner writes candidate problems; near-duplicates and
low-quality statements are filtered out; a defect screen keeps only
problems the base model actually fails; a diverse subset is selected over
embeddings; committee answers battle pairwise under judge votes fused with
persistent ratings; the winner becomes the gold standard; gold/failure
pairs feed a hybrid preference loss. Every stage runs offline against the
seeded mock backend.
"""

__version__ = "0.1.0"
