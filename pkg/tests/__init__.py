# Ensure package-style test discovery and allow path adjustments via conftest


