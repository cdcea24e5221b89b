"""Hellinger-Kantorovich distances and geodesics between discrete measures."""
