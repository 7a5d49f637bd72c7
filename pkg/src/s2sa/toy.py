"""Small synthetic dialogue corpus for smoke runs and memorization checks."""
from __future__ import annotations

from .corpus import DialoguePair
from .numeric import SeededRng

SUBJECTS = ["i", "you", "we", "they", "she", "he", "my friend", "the doctor"]
VERBS = ["saw", "like", "need", "found", "want", "lost", "fixed", "bought"]
OBJECTS = ["the car", "a dog", "my keys", "the book", "some food", "the money", "a ticket", "the map"]
TAILS = ["today", "last night", "at home", "in town", "again", "so fast", "for you", "yesterday"]
OPENERS = ["yes", "no", "really", "why", "well", "okay", "sure", "what"]
REPLIES = [
    "that is great", "i do not know", "where is it", "tell me more", "we should go",
    "it was mine", "you are right", "not again", "how much", "keep it",
]


def toy_pairs(n: int = 50, seed: int = 7) -> list[DialoguePair]:
    """``n`` distinct pairs with messages of at least five tokens."""
    rng = SeededRng(seed)
    pairs: list[DialoguePair] = []
    seen = set()
    while len(pairs) < n:
        msg = " ".join([
            SUBJECTS[rng.integer(0, len(SUBJECTS))],
            VERBS[rng.integer(0, len(VERBS))],
            OBJECTS[rng.integer(0, len(OBJECTS))],
            TAILS[rng.integer(0, len(TAILS))],
        ]).split()
        resp = (OPENERS[rng.integer(0, len(OPENERS))] + " " + REPLIES[rng.integer(0, len(REPLIES))]).split()
        key = tuple(msg)
        if key in seen:
            continue
        seen.add(key)
        pairs.append(DialoguePair(tuple(msg), tuple(resp)))
    return pairs
