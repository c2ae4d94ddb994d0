"""Quantum Fisher information for a time-dependent nonlinear optomechanical Hamiltonian."""
