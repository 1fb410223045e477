"""Context-aware image descriptions for web pages.

The package turns a captured page snapshot (URL, title, text segments with
geometry, selected image) into four descriptions — context-aware and
context-free, each in a short and a long form — by scoring page text for
image relevance and driving a multi-stage vision-language-model prompt
chain. An HTTP service, a persistent description cache, and a batch
evaluation harness sit on top of the pipeline.
"""

__version__ = "0.1.0"
