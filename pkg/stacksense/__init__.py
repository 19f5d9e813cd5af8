"""
stacksense identifies the operating system of a host from the way its TCP/IP stack
answers a fixed set of probes, and Windows versions from their DCE-RPC endpoints.
"""
__version__ = "0.1.0"
