"""Two-dimensional empirical wavelet transform toolkit."""
