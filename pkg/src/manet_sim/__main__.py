"""
Entry point for ``python -m manet_sim``.
"""

from manet_sim.runner import cli

if __name__ == "__main__":
    cli()
