"""Completion, constraint solving, matching and brute-force oracles"""
