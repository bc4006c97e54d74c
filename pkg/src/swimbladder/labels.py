"""Class label vocabulary shared by the generator, classifier and CLI."""

LABEL_WITH = "swim_bladder"
LABEL_WITHOUT = "no_swim_bladder"
LABELS = (LABEL_WITH, LABEL_WITHOUT)  # class indices 0, 1

ORIENTATIONS = ("dorsal", "lateral")
