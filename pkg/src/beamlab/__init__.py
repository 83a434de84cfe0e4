"""beamlab: a desk-scale lab for beam-search degradation and length-bias fixes.

Synthesizes length-biased parallel corpora, trains a smoothed count-based
transducer on them, decodes with configurable beam search, and reports how
(and on which sentences) quality moves as the beam grows. Includes
Multi-Sentence Resampling and length-proportional resampling as training-data
fixes, BLEU/WER/paired-bootstrap metrics, and category/bucket analysis.
"""

__version__ = "0.1.0"
