"""Reference external-model adapters speaking the AGV1 framed protocol."""
