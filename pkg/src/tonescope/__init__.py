"""Contrast-enhancement estimation from single grayscale images.

Library layout:

- ``histogram``: pixel histograms, Wasserstein-1 distance, simplex projection
- ``transforms``: tone curves, transfer matrices, histogram matching
- ``noise``: additive-noise blur acting on histograms
- ``solver``: recover the original histogram given a known curve
- ``parametric``: grid-search estimation of parametric curves
- ``nonparametric``: joint recovery of a free-form curve and histogram
- ``localize``: graph-cut detection of inconsistently enhanced regions
- ``image_io``: PGM / PNG grayscale input and output
- ``synth``: reproducible synthetic test images
- ``metrics``: estimation accuracy rates
- ``cli``: the ``tonescope`` command line
"""

__version__ = "0.1.0"
