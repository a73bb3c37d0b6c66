"""Readers and writers for every permsynth file format."""
