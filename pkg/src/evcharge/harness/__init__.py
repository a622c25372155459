"""Generators, benchmarks, scenario files, and policy comparisons."""
