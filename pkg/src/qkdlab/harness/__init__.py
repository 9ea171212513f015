"""Command line, run specs, sweeps and the networked Alice/Bob/Eve mode."""

from .net import connect_alice, eve_proxy, serve_bob
from .runner import execute, run, sweep
from .spec import RunSpec, SpecError, load_spec, spec_from_dict
from .wire import TransportError

__all__ = ["RunSpec", "SpecError", "TransportError", "connect_alice", "eve_proxy", "execute", "load_spec",
           "run", "serve_bob", "spec_from_dict", "sweep"]
