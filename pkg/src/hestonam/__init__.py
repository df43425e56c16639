"""hestonam - American options under Heston: LSM boundaries and semi-analytic prices."""

__version__ = "0.1.0"
