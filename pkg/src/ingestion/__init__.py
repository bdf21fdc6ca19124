"""Spec file loading and automaton serialization"""
