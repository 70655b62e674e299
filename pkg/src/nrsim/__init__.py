"""Deterministic discrete-event simulator of the 5G NR initial-access and
broadcast plane, with rogue-cell SIB1 spoofing and RAR timing-advance
manipulation."""

__version__ = "0.1.0"
