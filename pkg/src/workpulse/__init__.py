"""Context-aware productivity and well-being engine.

Replays multimodal sensor traces (ECG, IMU, frame captions, screen
snapshots, audio transcripts) on a virtual clock, derives stress and
activity state, aggregates a per-interval routine table, and drives three
model-backed pipelines: criticality-gated well-being interventions, a
tone-adaptive chat agent, and task-automation agents.
"""

__version__ = "0.1.0"
