#!/usr/bin/env python3
"""
Active consensus - Module entry point
"""

from active_consensus.main import main

if __name__ == "__main__":
    main()
