"""Shared utilities and domain management."""