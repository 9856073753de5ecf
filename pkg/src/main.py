#!/usr/bin/env python3
"""
geolift: latent position recovery from similarity matrices

Runs a pipeline stage from a source checkout.

Usage:
    python main.py <simulate|embed|isomap|evaluate|pipeline> --config <file> [--out DIR]
"""

from geolift.cli import main

if __name__ == "__main__":
    main()
