"""HTTP service exposing the estimation library."""
