"""Panel ingestion, clustering, rank statistics, configuration and the command line."""
