"""Evolvable agents with gossip-based migration, an island-model baseline and
a discrete-event network simulator to run both on."""

__version__ = "0.1.0"
