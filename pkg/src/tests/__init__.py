"""Test suite for the SOOG abstraction toolkit."""
