"""Test package for cloudcontrol."""
