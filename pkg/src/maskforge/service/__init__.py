"""Interactive weak-supervision session API over the filtering pipeline."""
