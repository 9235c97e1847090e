"""advbench: adversarial-robustness evaluation for desk-scale image classifiers.

Subpackages: core (classifier contract, losses, datasets), attacks (PGD/FGSM
and a trained perturbation generator), defenses (adversarial training
variants), robustbench (common-perturbation sequences and flip probability),
metrics (rates and introspection), harness (toy data, experiments, CLI).
"""

__version__ = "0.1.0"
