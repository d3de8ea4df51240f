"""fusionchain: expected fusion counts for adaptive graph-state generation."""
