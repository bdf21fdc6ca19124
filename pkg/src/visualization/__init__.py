"""Graphviz export"""
