"""Joint multi-agent area assignment and coverage routing with an autoregressive policy."""
