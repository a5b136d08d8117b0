"""Fluid model of the two-hop path server -> edge cache -> client.

The core hop feeds the edge cache at rate c(t); the edge hop drains it
towards the client at rate e(t). While the cache holds data the client
receives at e(t); once it is empty, data cuts through at min(c, e). A cache
capacity of 0 turns the node into a plain relay, i.e. the end-to-end
behaviour of a client-driven player.

Rates are piecewise constant, so the evolution is piecewise linear and is
integrated event by event (step boundaries, cache empty/full, demand met).
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Tuple

from .bandwidth import BandwidthTimeline
from .errors import HorizonError

INF = math.inf


class Transfer(NamedTuple):
    finish: float
    """Instant the demand was met; ``inf`` if it was not met by ``until``."""
    end: float
    """Instant the integration stopped (``finish`` or ``until``)."""
    cache: float
    delivered: float
    storage: float
    """Integral of cache occupancy over ``[start, end]`` (kbit*s)."""
    trace: Optional[Tuple[Tuple[float, float, float], ...]] = None
    """``(time, occupancy, delivered)`` at every event, when recorded."""


def transfer(
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    start: float,
    cache: float = 0.0,
    demand: Optional[float] = None,
    until: float = INF,
    capacity: float = INF,
    record: bool = False,
) -> Transfer:
    """Integrate the path from ``start`` with ``cache`` kbit already staged.

    With ``demand`` set, the client downloads until it has received that
    many kbit (``inf`` downloads without end). With ``demand=None`` the
    client is idle and the core only stages data into the cache.
    Integration stops at ``until``; running past the timelines' horizon
    raises :class:`HorizonError`.
    """
    horizon = min(core.horizon, edge.horizon)
    if start > horizon:
        raise HorizonError(f"transfer starts at {start}, past the horizon {horizon}")
    if demand is None and until == INF:
        raise ValueError("an idle transfer needs a finite 'until'")
    limit = until if until < horizon else horizon
    downloading = demand is not None
    need = demand if downloading else 0.0

    cs, cr = core.starts, core.rates
    es, er = edge.starts, edge.rates
    nc, ne = len(cs), len(es)
    ic = core.index_at(start)
    ie = edge.index_at(start)

    t = start
    q = cache
    got = 0.0
    storage = 0.0
    points = [(t, q, got)] if record else None

    while True:
        if downloading and got >= need:
            break
        if t >= limit:
            break
        while ic + 1 < nc and cs[ic + 1] <= t:
            ic += 1
        while ie + 1 < ne and es[ie + 1] <= t:
            ie += 1
        nxt = limit
        if ic + 1 < nc and cs[ic + 1] < nxt:
            nxt = cs[ic + 1]
        if ie + 1 < ne and es[ie + 1] < nxt:
            nxt = es[ie + 1]

        c = cr[ic]
        e = er[ie] if downloading else 0.0
        if q > 0:
            out = e
        else:
            out = e if e < c else c
        inflow = c
        if q >= capacity and inflow > out:
            inflow = out
        dq = inflow - out

        dt_end = nxt - t
        dt = dt_end
        dt_need = INF
        if downloading and out > 0:
            dt_need = (need - got) / out
            if dt_need < dt:
                dt = dt_need
        dt_empty = INF
        dt_full = INF
        if dq < 0:
            dt_empty = q / -dq
            if dt_empty < dt:
                dt = dt_empty
        elif dq > 0 and capacity < INF:
            dt_full = (capacity - q) / dq
            if dt_full < dt:
                dt = dt_full

        if dt == dt_empty:
            q_next = 0.0
        elif dt == dt_full:
            q_next = capacity
        else:
            q_next = q + dq * dt
            if q_next < 0:
                q_next = 0.0
        storage += 0.5 * (q + q_next) * dt
        got = need if dt == dt_need else got + out * dt
        q = q_next
        t = nxt if dt == dt_end else t + dt
        if record:
            points.append((t, q, got))

    done = downloading and got >= need
    if not done and t < until and t >= horizon:
        raise HorizonError(f"transfer from {start} ran past the horizon {horizon}")
    return Transfer(
        finish=t if done else INF,
        end=t,
        cache=q,
        delivered=got,
        storage=storage,
        trace=tuple(points) if record else None,
    )


def deliverable(
    core: BandwidthTimeline,
    edge: BandwidthTimeline,
    start: float,
    end: float,
    cache: float = 0.0,
    capacity: float = INF,
) -> float:
    """Volume the client can receive over ``[start, end]`` by downloading continuously."""
    return transfer(core, edge, start, cache, demand=INF, until=end, capacity=capacity).delivered
