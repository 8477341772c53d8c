"""Worker-pool sizing shared by the Monte Carlo layers."""

import os

WORKERS_ENV = "NOISYHOPF_WORKERS"


def worker_count(requested=None):
    """Resolve a pool size: explicit value, then ``$NOISYHOPF_WORKERS``, then CPU count."""
    if requested is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def chunked(items, n_chunks):
    """Split ``items`` into at most ``n_chunks`` contiguous, order-preserving blocks."""
    items = list(items)
    n_chunks = max(1, min(n_chunks, len(items)))
    size, extra = divmod(len(items), n_chunks)
    out, start = [], 0
    for i in range(n_chunks):
        stop = start + size + (1 if i < extra else 0)
        out.append(items[start:stop])
        start = stop
    return out
