"""Compute-and-forward equation selection and outage analysis.

    Optimum and simplified CMF(K) coefficient selection for a two-source,
    M-relay network, exact outage analysis of CMF(K) and a seeded Monte Carlo
    simulator to cross-check it.
"""
__application__ = "cmf-relay"
__vendor__ = "RelayNet"

__version__ = "0.3.0"
__date__ = "17 Oct 2026"
__copyright__ = "(c) 2026 RelayNet"
__author_name__ = "RelayNet Developers"
__author_email__ = "dev@relaynet.invalid"
__author__ = f"{__author_name__} <{__author_email__}>"
__description__ = f"{__application__} compute-and-forward toolkit"
