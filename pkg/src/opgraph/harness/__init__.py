"""Reference oracles, fidelity protocol, closure and extension drivers, reports and CLI."""
