"""
Bandwidth-map merging for a virtualised PON upstream: the stateful
heuristic, the stateless baseline, the exact oracle, the synthetic traffic
generator and compliance accounting. Nothing in this package imports Django.
"""
