"""Link-level simulator for nonlinear-LED MIMO NOMA visible-light downlinks.

Core pieces: Lambertian line-of-sight channel generation, Rapp LED model
with an adaptive Chebyshev-NLMS pre-distorter, SVD-exponent precoding,
QoS-driven power allocation with SIC detection, analytic square M-QAM
BER upper bounds, and a deterministic Monte Carlo sweep harness.
"""

__version__ = "0.1.0"
