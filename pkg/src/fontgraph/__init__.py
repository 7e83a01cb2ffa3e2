"""fontgraph: glyph outlines, point sets, hierarchical graphs and raster images.

The package converts glyphs between four modalities and uses the graph as the
pivot representation for learned font completion, interactive manipulation and
latent-space interpolation.
"""

__version__ = "0.1.0"
