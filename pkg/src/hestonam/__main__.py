"""
Main entry point for running hestonam as a module.

Allows running: python -m hestonam
"""

from .cli.main import cli

if __name__ == '__main__':
    cli()
