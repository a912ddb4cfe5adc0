"""Configuration, initial data, experiments and the acceptance suite."""
