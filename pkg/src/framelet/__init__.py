"""Deep convolutional framelet denoising with mixed Haar / Daubechies-4 wavelet pooling."""

__version__ = "0.1.0"
