"""Service layer.

Runs configured checker commands and keeps the run ledger, independent of the
argparse front end so other front ends can reuse them.
"""
