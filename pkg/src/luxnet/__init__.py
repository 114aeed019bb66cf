"""luxnet: simulation library for light-powered sensor networks.

Small indoor sensor nodes harvest their power from room light, report
over an optical uplink, and can top each other up by aiming short LED
energy bursts at a neighbour's photovoltaic faces.  This package models
the pieces of such a network (optical channel, harvester and storage
energetics, the 44-bit control protocol, node and access-point state
machines) and runs scenario-driven discrete-event simulations over them.
"""

__version__ = "0.1.0"
