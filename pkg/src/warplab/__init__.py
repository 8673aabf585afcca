"""warplab: volume growth, ends and extrinsic balls of submanifolds in warped-product model spaces."""
__version__ = "0.1.0"
