"""Lattice tree automata and completion toolkit"""

__version__ = "0.1.0"
