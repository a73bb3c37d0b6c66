"""permsynth - RL synthesis of permutation circuits on square-lattice topologies."""

__version__ = "0.1.0"
