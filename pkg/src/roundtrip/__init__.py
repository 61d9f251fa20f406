"""Round-trip orbits, reduced return maps and reversible symplectic matrices."""

__version__ = "0.1.0"
