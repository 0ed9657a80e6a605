"""Reactive fronts under Stokes-Boussinesq flow in a 2D channel."""
