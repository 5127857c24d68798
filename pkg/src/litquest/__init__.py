"""litquest: literary evidence retrieval over primary-source texts.

Pipeline: ingest and segment books, mine quotation/analysis windows from
scholarly text, rank candidate passages with BM25 or a trained dual encoder,
and evaluate rankings with recall@k / mean rank plus a 3-way proxy task.
"""

__version__ = "0.1.0"
