"""
Radial distribution grid: the constraint set Z, the cost vector c and the
BLA coupling matrix A, laid out on a ProblemBuilder.

Branch flows are oriented parent to child from the tie-line bus. Voltage drop
follows the linearized DistFlow model with impedances per unit on base_kva.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from app.models.grid import Branch, GridBlock, NetworkModel
from app.models.milp import ProblemBuilder, Sense, VarKind, diagonal, identity
from app.services.atdm import lambda_matrix
from app.utils.exceptions import InvalidModelError, InvalidPlacementError
from app.views.reports import ValidationReport


@dataclass(slots=True, frozen=True)
class OrientedBranch:
    parent: int
    child: int
    branch: Branch


def _series(values: Sequence[float], T: int, label: str) -> np.ndarray:
    if len(values) == 1:
        return np.full(T, float(values[0]))
    if len(values) != T:
        raise InvalidModelError(f"{label} has {len(values)} values, expected 1 or {T}")
    return np.asarray(values, dtype=float)


def _series_lengths(n: NetworkModel) -> list[tuple[str, int]]:
    lengths = [
        ("tie_line.p_max", len(n.tie_line.p_max)),
        ("tie_line.buy_price", len(n.tie_line.buy_price)),
        ("tie_line.sell_price", len(n.tie_line.sell_price)),
    ]
    for bus in n.buses:
        lengths += [(f"bus {bus.id} p_load", len(bus.p_load)), (f"bus {bus.id} q_load", len(bus.q_load))]
    for i, res in enumerate(n.renewables):
        lengths += [(f"renewable {i} p_max", len(res.p_max)), (f"renewable {i} q_max", len(res.q_max))]
    return lengths


def validate_network(n: NetworkModel, horizon: Optional[int] = None) -> ValidationReport:
    """Check topology, bound sanity and placements. Never raises."""
    findings: list[str] = []
    ids = [bus.id for bus in n.buses]
    known = set(ids)
    if len(known) != len(ids):
        findings.append("duplicate bus ids")
    if n.tie_line.bus not in known:
        findings.append(f"tie line bus {n.tie_line.bus} is not a bus")

    index = {bus_id: i for i, bus_id in enumerate(ids)}
    edges = []
    for br in n.branches:
        if br.from_bus not in known or br.to_bus not in known:
            findings.append(f"branch {br.from_bus}-{br.to_bus} references an unknown bus")
            continue
        if br.from_bus == br.to_bus:
            findings.append(f"branch {br.from_bus}-{br.to_bus} is a self loop")
            continue
        edges.append((index[br.from_bus], index[br.to_bus]))
        if br.r < 0 or br.x < 0 or br.p_max < 0:
            findings.append(f"branch {br.from_bus}-{br.to_bus} has a negative impedance or limit")

    if edges and len(edges) == len(n.branches):
        graph = _adjacency(edges, len(ids))
        components, _ = connected_components(graph, directed=False)
        if len(edges) > len(ids) - 1 or len({tuple(sorted(e)) for e in edges}) < len(edges):
            findings.append("network is not radial: branch graph contains a cycle")
        elif components > 1:
            findings.append(f"network is not radial: {components} disconnected parts")
    elif not edges and len(ids) > 1 and not n.branches:
        findings.append(f"network is not radial: {len(ids)} buses without branches")

    for bus in n.buses:
        if bus.v_min < 0 or bus.v_min > bus.v_max:
            findings.append(f"bus {bus.id} voltage bounds [{bus.v_min}, {bus.v_max}] are invalid")
    if any(value < 0 for value in n.tie_line.p_max):
        findings.append("tie line limit must be nonnegative")

    for i, bt in enumerate(n.batteries):
        label = f"battery {i} at bus {bt.bus}"
        if bt.bus not in known:
            findings.append(f"{label}: unknown bus")
        if not 0 < bt.eta_chr <= 1 or not 0 < bt.eta_dis <= 1:
            findings.append(f"{label}: efficiency out of range (0, 1]")
        if not 0 <= bt.sigma < 1:
            findings.append(f"{label}: self-discharge out of range [0, 1)")
        if min(bt.p_chr_max, bt.p_dis_max, bt.q_max, bt.e_min) < 0:
            findings.append(f"{label}: negative bound")
        if not bt.e_min <= bt.e_init <= bt.e_max:
            findings.append(f"{label}: initial energy outside [{bt.e_min}, {bt.e_max}]")
        if bt.e_terminal is not None and bt.e_terminal > bt.e_max:
            findings.append(f"{label}: terminal energy above capacity")

    for i, res in enumerate(n.renewables):
        if res.bus not in known:
            findings.append(f"renewable {i}: unknown bus {res.bus}")
        if any(v < 0 for v in res.p_max) or any(v < 0 for v in res.q_max):
            findings.append(f"renewable {i}: negative bound")

    placed = [p.bla_id for p in n.placements]
    if len(set(placed)) != len(placed):
        findings.append("a BLA is placed on more than one bus")
    for p in n.placements:
        if p.bus not in known:
            findings.append(f"BLA {p.bla_id} placed on unknown bus {p.bus}")

    if horizon is not None:
        for label, size in _series_lengths(n):
            if size not in (1, horizon):
                findings.append(f"{label} has {size} values, expected 1 or {horizon}")

    return ValidationReport(passed=not findings, findings=findings)


def _adjacency(edges: list[tuple[int, int]], size: int) -> sp.csr_matrix:
    rows = [a for a, _ in edges]
    cols = [b for _, b in edges]
    return sp.csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(size, size))


def orient_branches(n: NetworkModel) -> list[OrientedBranch]:
    """Branches in breadth-first order from the tie bus, each pointing parent to child."""
    ids = [bus.id for bus in n.buses]
    index = {bus_id: i for i, bus_id in enumerate(ids)}
    if not n.branches:
        return []
    graph = _adjacency([(index[b.from_bus], index[b.to_bus]) for b in n.branches], len(ids))
    order, predecessors = breadth_first_order(
        graph, index[n.tie_line.bus], directed=False, return_predecessors=True
    )
    rank = {node: i for i, node in enumerate(order)}
    oriented = []
    for br in n.branches:
        a, b = index[br.from_bus], index[br.to_bus]
        if predecessors[b] == a:
            oriented.append(OrientedBranch(parent=br.from_bus, child=br.to_bus, branch=br))
        else:
            oriented.append(OrientedBranch(parent=br.to_bus, child=br.from_bus, branch=br))
    oriented.sort(key=lambda ob: rank[index[ob.child]])
    return oriented


def build_grid_block(n: NetworkModel, T: int) -> GridBlock:
    report = validate_network(n, horizon=T)
    if not report.passed:
        raise InvalidModelError("invalid network: " + "; ".join(report.findings))

    dt = n.dt
    I = identity(T)
    zeros = np.zeros(T)
    b = ProblemBuilder()

    # tie line
    tie = n.tie_line
    tie_max = _series(tie.p_max, T, "tie_line.p_max")
    buy = _series(tie.buy_price, T, "tie_line.buy_price")
    sell = _series(tie.sell_price, T, "tie_line.sell_price")
    p_buy = b.add_variables("p_buy", T, lower=0.0, upper=tie_max, cost=dt * buy, cost_class="grid")
    p_sell = b.add_variables("p_sell", T, lower=0.0, upper=tie_max, cost=-dt * sell, cost_class="grid")
    eps_b = b.add_variables("eps_b", T, kind=VarKind.BINARY)
    eps_s = b.add_variables("eps_s", T, kind=VarKind.BINARY)
    q_grid = b.add_variables("q_grid", T)
    b.add_rows("tie.buy_gate", [(I, p_buy), (diagonal(-tie_max), eps_b)], Sense.LE, 0.0)
    b.add_rows("tie.sell_gate", [(I, p_sell), (diagonal(-tie_max), eps_s)], Sense.LE, 0.0)
    b.add_rows("tie.exclusive", [(I, eps_b), (I, eps_s)], Sense.LE, 1.0)

    # p_terms[bus] collects (coefficient, cols) pairs of the active injection definition
    p_terms: dict[int, list] = {bus.id: [] for bus in n.buses}
    q_terms: dict[int, list] = {bus.id: [] for bus in n.buses}
    p_terms[tie.bus] += [(I, p_buy), (-I, p_sell)]
    q_terms[tie.bus].append((I, q_grid))

    for i, res in enumerate(n.renewables):
        p_res = b.add_variables(
            f"res.{i}.p", T, lower=0.0, upper=_series(res.p_max, T, f"renewable {i} p_max"),
            cost=dt * res.cost, cost_class="om",
        )
        q_res = b.add_variables(f"res.{i}.q", T, lower=0.0, upper=_series(res.q_max, T, f"renewable {i} q_max"))
        p_terms[res.bus].append((I, p_res))
        q_terms[res.bus].append((I, q_res))

    shift = sp.csr_matrix(lambda_matrix(1, T))
    for j, bt in enumerate(n.batteries):
        name = f"battery.{j}"
        p_chr = b.add_variables(f"{name}.p_chr", T, lower=0.0, upper=bt.p_chr_max, cost=dt * bt.cost, cost_class="om")
        p_dis = b.add_variables(f"{name}.p_dis", T, lower=0.0, upper=bt.p_dis_max, cost=dt * bt.cost, cost_class="om")
        eps_chr = b.add_variables(f"{name}.eps_chr", T, kind=VarKind.BINARY)
        eps_dis = b.add_variables(f"{name}.eps_dis", T, kind=VarKind.BINARY)
        q_bt = b.add_variables(f"{name}.q", T, lower=-bt.q_max, upper=bt.q_max)
        energy = b.add_variables(f"{name}.e", T, lower=bt.e_min, upper=bt.e_max)
        b.add_rows(f"{name}.chr_gate", [(I, p_chr), (-bt.p_chr_max * I, eps_chr)], Sense.LE, 0.0)
        b.add_rows(f"{name}.dis_gate", [(I, p_dis), (-bt.p_dis_max * I, eps_dis)], Sense.LE, 0.0)
        b.add_rows(f"{name}.exclusive", [(I, eps_chr), (I, eps_dis)], Sense.LE, 1.0)
        retained = 1.0 - bt.sigma
        rhs = zeros.copy()
        rhs[0] = retained * bt.e_init
        b.add_rows(
            f"{name}.energy",
            [(I - retained * shift, energy), (-dt * bt.eta_chr * I, p_chr), (dt / bt.eta_dis * I, p_dis)],
            Sense.EQ,
            rhs,
        )
        last = sp.csr_matrix(([1.0], ([0], [T - 1])), shape=(1, T))
        terminal = bt.e_init if bt.e_terminal is None else bt.e_terminal
        b.add_rows(f"{name}.terminal", [(last, energy)], Sense.GE, terminal)
        p_terms[bt.bus] += [(I, p_dis), (-I, p_chr)]
        q_terms[bt.bus].append((I, q_bt))

    bla_slots: dict[str, np.ndarray] = {}
    for placement in n.placements:
        slot = b.add_variables(f"bla.{placement.bla_id}.p", T)
        bla_slots[placement.bla_id] = slot
        p_terms[placement.bus].append((-I, slot))

    p_inj: dict[int, np.ndarray] = {}
    q_inj: dict[int, np.ndarray] = {}
    voltage: dict[int, np.ndarray] = {}
    for bus in n.buses:
        p_inj[bus.id] = b.add_variables(f"bus.{bus.id}.p_inj", T)
        q_inj[bus.id] = b.add_variables(f"bus.{bus.id}.q_inj", T)
        if bus.id == tie.bus:
            voltage[bus.id] = b.add_variables(f"bus.{bus.id}.v", T, lower=n.v0, upper=n.v0)
        else:
            voltage[bus.id] = b.add_variables(f"bus.{bus.id}.v", T, lower=bus.v_min, upper=bus.v_max)
        p_load = _series(bus.p_load, T, f"bus {bus.id} p_load")
        q_load = _series(bus.q_load, T, f"bus {bus.id} q_load")
        b.add_rows(
            f"bus.{bus.id}.p_def",
            [(I, p_inj[bus.id])] + [(-m, cols) for m, cols in p_terms[bus.id]],
            Sense.EQ,
            -p_load,
        )
        b.add_rows(
            f"bus.{bus.id}.q_def",
            [(I, q_inj[bus.id])] + [(-m, cols) for m, cols in q_terms[bus.id]],
            Sense.EQ,
            -q_load,
        )

    inflow_p: dict[int, list] = {bus.id: [] for bus in n.buses}
    inflow_q: dict[int, list] = {bus.id: [] for bus in n.buses}
    scale = 1.0 / (n.base_kva * n.v0)
    for ob in orient_branches(n):
        br = ob.branch
        label = f"branch.{ob.parent}-{ob.child}"
        p_br = b.add_variables(f"{label}.p", T, lower=-br.p_max, upper=br.p_max)
        q_br = b.add_variables(f"{label}.q", T)
        inflow_p[ob.child].append((I, p_br))
        inflow_p[ob.parent].append((-I, p_br))
        inflow_q[ob.child].append((I, q_br))
        inflow_q[ob.parent].append((-I, q_br))
        b.add_rows(
            f"{label}.v_drop",
            [(I, voltage[ob.child]), (-I, voltage[ob.parent]), (br.r * scale * I, p_br), (br.x * scale * I, q_br)],
            Sense.EQ,
            0.0,
        )

    for bus in n.buses:
        b.add_rows(f"bus.{bus.id}.p_balance", [(I, p_inj[bus.id])] + inflow_p[bus.id], Sense.EQ, 0.0)
        b.add_rows(f"bus.{bus.id}.q_balance", [(I, q_inj[bus.id])] + inflow_q[bus.id], Sense.EQ, 0.0)

    problem = b.build(mode="grid", bla_ids=tuple(bla_slots))
    return GridBlock(problem=problem, periods=T, bla_slots=bla_slots)


def coupling_matrix(
    n: NetworkModel, block: GridBlock, bla_ids: Optional[Sequence[str]] = None
) -> sp.csr_matrix:
    """
    Selector A with A·z + u = 0, i.e. u_k equals the BLA power slot of its bus.

    Rows are ordered by BLA, then by period.
    """
    ids = list(block.bla_slots) if bla_ids is None else list(bla_ids)
    T = block.periods
    rows, cols = [], []
    for k, bla_id in enumerate(ids):
        if n.placement_of(bla_id) is None or bla_id not in block.bla_slots:
            raise InvalidPlacementError(f"BLA {bla_id} is not placed on any bus")
        rows.extend(range(k * T, (k + 1) * T))
        cols.extend(block.bla_slots[bla_id].tolist())
    return sp.csr_matrix(
        (-np.ones(len(rows)), (rows, cols)), shape=(len(ids) * T, block.num_variables)
    )
