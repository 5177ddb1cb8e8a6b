"""Configuration, validation campaigns, sweeps, plotting and the CLI."""
