"""Live-show orchestration: audience sketches through queued generative
pipelines with human moderation, plus the Oracle choreography scorer."""

__version__ = "0.1.0"
