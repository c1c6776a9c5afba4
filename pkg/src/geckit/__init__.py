"""Desk-scale grammatical-error-correction experimentation toolkit.

Subpackages cover the full pipeline: corpus handling (`textcore`),
synthetic error injection (`noiser`), adversarial test-set construction
(`attacker`), edit-based scoring (`scorer`), a small trainable
encoder-decoder transformer (`model`), knowledge distillation
(`distill`), and an end-to-end experiment driver (`pipeline`, `cli`).
"""

__version__ = "0.1.0"
