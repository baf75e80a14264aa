"""orbitlab: operator-orbit frames, Kaczmarz auxiliary sequences and A2 weight diagnostics."""

__version__ = "0.1.0"
