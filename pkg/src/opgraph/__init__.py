"""Typed operator graphs over a finite basis of imaging primitives.

Submodules are imported explicitly (``opgraph.operators``, ``opgraph.graph_ir``,
``opgraph.metrics``, ``opgraph.registry``, ``opgraph.harness``); the top-level
package stays import-light so that the reference oracles can be loaded without
pulling in the operator implementations.
"""

__version__ = "0.1.0"
