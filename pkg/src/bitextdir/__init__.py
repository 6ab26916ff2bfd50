"""bitextdir: translation-direction tagging for parallel corpora and pseudo
quality-estimation data forging.

The package splits a parallel corpus into source-original and
target-original partitions with a pair of monolingual classifiers, measures
translationese signals (token-type ratio, lexical density, vocabulary
divergence), and turns the selected partition plus externally produced MT
hypotheses into QE training data: sentence-level edit-rate scores and
word-level OK/BAD tags.
"""

__version__ = "0.1.0"
