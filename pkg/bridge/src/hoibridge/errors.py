class BridgeError(Exception):
    """Export failure: bad config, unreadable image, or model load problem."""
