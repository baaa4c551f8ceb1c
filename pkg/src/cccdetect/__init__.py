"""Collateral-circulation detection on angiography frame sequences.

Subpackages:
    nn          float32 tensor numerics: layers, losses, Adam, gradient checking
    data        sequence/annotation ingestion, clip selection, masks, folds, synthesis
    models      spatial backbone, segmentation head, temporal classifier
    training    pretraining, vanilla/few-shot training, cross-validation
    evaluation  confusion-matrix and Dice metrics, subgroup analyses
    report      delimited output plus rendered figures
"""

__version__ = "0.1.0"
