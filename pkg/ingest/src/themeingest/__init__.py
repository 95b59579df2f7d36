"""Input-file producers for the visualthemes pipeline.

Emits per-image feature files (manifest + float32 payload) and
word2vec-format embedding subsets; the only contract with the consumer
is those file formats.
"""

__version__ = "0.1.0"
