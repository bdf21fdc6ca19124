"""Automaton operations, partitioned determinization and concrete rewriting"""
