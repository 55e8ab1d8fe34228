"""Bootstrapped abusive-intent detection.

Pipeline: clean and segment a corpus, infer initial intent labels from
dependency templates, expand the desire-verb lexicon in embedding space,
co-train an n-gram learner and a recurrent attention learner to a stable
label set, fuse with a supervised abuse classifier, and score segments
and documents. A small annotation service validates the labels against
human votes.
"""

__version__ = "0.1.0"
