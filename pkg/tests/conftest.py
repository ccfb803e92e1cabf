"""Shared fixtures and small hand-built substrates for the test suite."""

from __future__ import annotations

import pytest

from sliceplace.topology import (
    DCKind,
    LinkKind,
    NodeKind,
    PhysicalNetwork,
    TopologyParams,
    build_reference_psn,
)


@pytest.fixture(scope="session")
def ref():
    """Scale-1 reference substrate, shared read-only across the session.

    Tests that allocate anything must use `psn` (or clone) instead.
    """
    return build_reference_psn()


@pytest.fixture()
def psn():
    """Fresh scale-1 reference substrate safe to mutate."""
    return build_reference_psn()


def make_pair(
    *,
    edc_servers: int = 2,
    cdc_servers: int = 2,
    cpu: float = 50.0,
    ram: float = 300.0,
    edc_bw: float = 10.0,
    cdc_bw: float = 100.0,
    km: float = 100.0,
    params: TopologyParams | None = None,
) -> PhysicalNetwork:
    """One EDC and one CDC joined by a single transport link, one UAP.

    Mirrors the reference builder's conventions: star DCs, zero-latency
    intra links, transport capped at the slower endpoint tier.
    """
    if params is None:
        params = TopologyParams()
    net = PhysicalNetwork(params)
    edc = net.add_data_center("edc0", DCKind.EDC)
    for i in range(edc_servers):
        sid = net.add_server(f"edc0-s{i:02d}", "edc0", cpu, ram)
        net.add_link(edc.switch, sid, 0.0, LinkKind.INTRA_DC, edc_bw)
    cdc = net.add_data_center("cdc0", DCKind.CDC)
    for i in range(cdc_servers):
        sid = net.add_server(f"cdc0-s{i:02d}", "cdc0", cpu, ram)
        net.add_link(cdc.switch, sid, 0.0, LinkKind.INTRA_DC, cdc_bw)
    net.add_link(edc.switch, cdc.switch, params.link_latency_ms(km),
                 LinkKind.TRANSPORT, min(edc_bw, cdc_bw))
    uap = net.add_node("uap00", NodeKind.UAP)
    net.add_link(uap, edc.switch, params.access_latency_ms, LinkKind.ACCESS, None)
    net.uaps.append(uap)
    net.validate()
    return net


def make_single_dc(
    *,
    kind: DCKind = DCKind.EDC,
    servers: int = 1,
    cpu: float = 50.0,
    ram: float = 300.0,
    bw: float = 10.0,
    params: TopologyParams | None = None,
) -> PhysicalNetwork:
    """A lone star DC with a UAP on its switch."""
    if params is None:
        params = TopologyParams()
    net = PhysicalNetwork(params)
    dc = net.add_data_center("dc0", kind)
    for i in range(servers):
        sid = net.add_server(f"dc0-s{i:02d}", "dc0", cpu, ram)
        net.add_link(dc.switch, sid, 0.0, LinkKind.INTRA_DC, bw)
    uap = net.add_node("uap00", NodeKind.UAP)
    net.add_link(uap, dc.switch, params.access_latency_ms, LinkKind.ACCESS, None)
    net.uaps.append(uap)
    net.validate()
    return net


def edc_server_ids(net: PhysicalNetwork, dc_id: str) -> list[int]:
    return sorted(net.data_centers[dc_id].servers)


def drain_dc(net: PhysicalNetwork, dc_id: str) -> None:
    """Allocate every server in a DC down to zero residual."""
    for sid in net.data_centers[dc_id].servers:
        srv = net.server(sid)
        net.allocate(sid, srv.cpu_residual, srv.ram_residual)
