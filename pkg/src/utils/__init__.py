"""
arsrank Utilities Package

Configuration, logging, the error hierarchy, seeded random streams and
finite-difference helpers shared by every other package.
"""
