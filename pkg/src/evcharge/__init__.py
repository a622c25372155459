"""Two-stage EV fleet charging toolkit."""
