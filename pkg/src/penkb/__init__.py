"""Semi-automated knowledge-base construction for cancer-genetics
penetrance literature: corpus ingestion, distant supervision, ascertainment
classification, joint entity-relation extraction, evaluation, and a
human-review service."""

__version__ = "0.1.0"
