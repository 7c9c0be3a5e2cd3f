"""Chat-model plumbing: HTTP client, prompts, reply schemas and a mock server."""
