"""Ten fixed evaluation corpora shared by the metric tests and the acceptance run.

Each is a list of ``(reference, candidate)`` strings.
"""

METRIC_FIXTURES = [
    [("the cat sat on the mat", "the cat sat on the mat")],
    [("the cat sat on the mat", "the the the the the the the")],
    [("i do not know", "i do not know what you mean"), ("what is it", "it is")],
    [("a b c d e", "x y z")],
    [("you are right", ""), ("we should go now", "we should go")],
    [("i do not know", "i do not know"), ("i do not know", "i do not know"), ("yes", "no")],
    [("he said that he would come back", "he said he would come back later"),
     ("where are you going", "where are we going"), ("ok", "ok ok")],
    [("a b a b a b", "a b a b"), ("b a", "a b a b a b a b")],
    [("what do you mean", "what do you think"), ("i am fine thanks", "i am fine"),
     ("see you tomorrow", "see you"), ("no", "yes"), ("it was mine", "it was yours")],
    [("one two three four five six", "one two three four five six seven"),
     ("alpha beta", "beta alpha"), ("q", "q")],
]
