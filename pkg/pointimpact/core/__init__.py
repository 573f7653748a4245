"""Configuration, logging, counters and random streams."""
