"""Contract checking and verification-condition emission for Scaffold
programs annotated with ScaffML behavioral specifications."""

__version__ = "0.1.0"
