"""Cavity magnon polariton magnetometry workbench."""
