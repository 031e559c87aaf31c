"""residue-lab: numerical and exact verification of residue identities on P^n."""

__version__ = "0.1.0"
