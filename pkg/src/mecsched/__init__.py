"""Distributed resource scheduling for multi-server MEC systems."""
