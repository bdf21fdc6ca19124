"""Core data models: lattices, terms, automata and rewrite rules"""
