"""Triangle map: a two-dimensional continued-fraction algorithm.

Digit statistics live in :mod:`trimap.statistics`; the transfer operator and
its kernel representation in :mod:`trimap.transfer_op` and :mod:`trimap.nuclear_rep`.
"""

__version__ = "0.1.0"
