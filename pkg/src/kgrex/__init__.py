"""Knowledge-graph rule mining, explanation generation, and evaluation toolkit."""

__version__ = "0.1.0"
