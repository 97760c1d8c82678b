"""Independent oracles and random generators for CloudControl tests."""
