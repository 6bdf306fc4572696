"""Word-level sequence labeling toolkit.

Feature-based linear-chain CRF and BiLSTM taggers (Softmax or CRF
inference) for NER, with optional joint POS+NER training, subword-aware
word embeddings, BIOES corpus tools, and token-level evaluation.
"""

__version__ = "0.1.0"
