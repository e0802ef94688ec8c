"""Free Point Transformer: unsupervised non-rigid point-set registration.

Training is Chamfer-loss minimization over on-the-fly augmented pairs of
mesh-sampled point sets; evaluation covers rigid/non-rigid/partial protocols
against an ICP baseline, plus transverse-process-angle measurement on
registered spine models.
"""

__version__ = "0.1.0"
