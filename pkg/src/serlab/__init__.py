"""serlab: a desk-scale speech emotion recognition laboratory.

Log-mel spectrogram extraction, a compact convolutional transformer with
three speaker-embedding fusion variants, class balancing and augmentation,
and cross-corpus / leave-one-speaker-out evaluation.
"""

__version__ = "0.1.0"
