"""Quality-driven NFR generation from functional requirements, a dual
human-evaluation workflow, and the metrics that summarize it."""

__version__ = "0.1.0"
