"""Tests Module - Test suite for the assembly services."""
