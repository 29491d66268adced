"""Reference-vector exporter.

Writes LVWT containers consumed only by the inference engine's
conformance test suite. Deliberately independent of the engine package:
everything here (container writer included) is implemented against the
format description, so agreement between the two sides is evidence, not
circularity.
"""

__version__ = "0.1.0"
