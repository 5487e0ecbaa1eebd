"""risac: secure RIS-aided integrated sensing and communication optimizer.

A base station serves legitimate users while illuminating radar targets
that double as eavesdroppers, with every link relayed by a reconfigurable
intelligent surface.  The package alternates between two subproblems:

* a Riemannian conjugate-gradient search for the surface's unitary
  scattering matrix (or unit-modulus diagonal in the conventional mode),
* a semidefinite relaxation for the transmit beamformers and the
  artificial-noise covariance, solved by a small dense interior-point
  method and followed by rank-one extraction.

See :mod:`risac.ao` for the alternating driver and :mod:`risac.cli` for
the batch experiment runner.
"""

__version__ = "0.1.0"
