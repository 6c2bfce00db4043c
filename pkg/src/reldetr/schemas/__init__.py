"""JSON schemas for reldetr reports, summaries, checkpoints and inputs."""
