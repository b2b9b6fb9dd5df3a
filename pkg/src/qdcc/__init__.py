"""qdcc: compiler toolkit for distributed quantum circuits.

Partitions circuits across a two-level network of compute nodes and
minimizes inter-node communication through buffer allocation, collective
block fusion/splitting, and buffer-aware routing and scheduling.
"""

__version__ = "0.1.0"
