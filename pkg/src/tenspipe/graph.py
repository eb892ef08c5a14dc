"""Graph construction and validation for parsed pipelines.

Builds element instances, resolves pad links (allocating request pads in
link order), rejects data-link cycles, binds repo slot pairs, negotiates
caps over every link in topological order, and marks combiner sink pads
that sit on a feedback loop.
"""

from __future__ import annotations

from collections import deque

from .caps import caps_intersect, fixate, negotiate_link
from .element import Element, Pad, PipelineContext, make_element
from .elements.combine import SyncCombiner
from .elements.flow import RepoSink, RepoSlot, RepoSource
from .errors import GraphError, NegotiationError, PipelineError, TenspipeError
from .parse import GraphSpec


class BuiltGraph:
    """Element instances plus resolved pad-level links."""

    def __init__(self, spec: GraphSpec, ctx: PipelineContext):
        self.spec = spec
        self.ctx = ctx
        self.elements: dict[str, Element] = {}
        self.links: list[tuple[Pad, Pad]] = []
        for node in spec.nodes.values():
            self.elements[node.name] = make_element(node.kind, node.name,
                                                    node.props, ctx)
        for link in spec.links:
            src_pad = self._resolve_pad(self.elements[link.src], "src",
                                        link.src_pad)
            dst_pad = self._resolve_pad(self.elements[link.dst], "sink",
                                        link.dst_pad)
            for pad in (src_pad, dst_pad):
                if pad.peer is not None:
                    raise GraphError(f"pad {pad.full_name} is linked twice")
            src_pad.peer = dst_pad
            dst_pad.peer = src_pad
            src_pad.filter_caps = link.filter_caps
            self.links.append((src_pad, dst_pad))

    @staticmethod
    def _resolve_pad(element: Element, direction: str, name: str | None) -> Pad:
        pads = element.src_pads if direction == "src" else element.sink_pads
        request = (element.request_src_pad if direction == "src"
                   else element.request_sink_pad)
        if name:
            for pad in pads:
                if pad.name == name:
                    return pad
            # request pads are created in index order until the name appears
            try:
                for _ in range(64):
                    pad = request()
                    if pad.name == name:
                        return pad
            except PipelineError:
                pass
            raise GraphError(f"{element.name} has no {direction} pad {name!r}")
        for pad in pads:
            if pad.peer is None:
                return pad
        try:
            return request()
        except PipelineError as exc:
            raise GraphError(
                f"{element.name}: no free {direction} pad ({exc})"
            ) from None

    # -- structural validation ---------------------------------------------

    def data_edges(self) -> dict[str, set[str]]:
        edges: dict[str, set[str]] = {name: set() for name in self.elements}
        for src_pad, dst_pad in self.links:
            edges[src_pad.element.name].add(dst_pad.element.name)
        return edges

    def repo_edges(self) -> dict[str, str]:
        """reposink element -> paired reposrc element, by slot name."""
        sinks: dict[str, str] = {}
        srcs: dict[str, str] = {}
        for name, el in self.elements.items():
            if isinstance(el, RepoSink):
                slot = el.props["slot"]
                if slot in sinks:
                    raise GraphError(
                        f"repo slot {slot!r} has two repo sinks "
                        f"({sinks[slot]}, {name})"
                    )
                sinks[slot] = name
            elif isinstance(el, RepoSource):
                slot = el.props["slot"]
                if slot in srcs:
                    raise GraphError(
                        f"repo slot {slot!r} has two repo sources "
                        f"({srcs[slot]}, {name})"
                    )
                srcs[slot] = name
        for slot in sinks.keys() | srcs.keys():
            if slot not in sinks or slot not in srcs:
                raise GraphError(
                    f"repo slot {slot!r} needs both a reposink and a reposrc"
                )
        return {sinks[slot]: srcs[slot] for slot in sinks}

    def _find_cycle(self, edges: dict[str, set[str]]) -> list[str] | None:
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {n: WHITE for n in edges}
        parent: dict[str, str | None] = {n: None for n in edges}

        def dfs(node: str) -> list[str] | None:
            color[node] = GRAY
            for nbr in sorted(edges[node]):
                if color[nbr] == GRAY:
                    cycle = [nbr]
                    cur = node
                    while cur is not None and cur != nbr:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.reverse()
                    return cycle
                if color[nbr] == WHITE:
                    parent[nbr] = node
                    found = dfs(nbr)
                    if found:
                        return found
            color[node] = BLACK
            return None

        for node in sorted(edges):
            if color[node] == WHITE:
                found = dfs(node)
                if found:
                    return found
        return None

    def validate(self) -> None:
        edges = self.data_edges()
        cycle = self._find_cycle(edges)
        if cycle:
            raise GraphError(
                "pipeline data links form a cycle: " + " -> ".join(cycle)
            )
        repo = self.repo_edges()

        # every pad linked
        for el in self.elements.values():
            for pad in el.sink_pads + el.src_pads:
                if pad.peer is None:
                    raise GraphError(f"pad {pad.full_name} is not linked")

        # every source reaches at least one sink
        sinks = {n for n, el in self.elements.items() if not el.src_pads}
        for name, el in self.elements.items():
            if el.sink_pads:
                continue
            reach = self._reachable(name, edges)
            if not (reach & sinks):
                raise GraphError(f"source {name} reaches no sink")

        # bind repo slots
        self.ctx.repo_slots.clear()
        for sink_name, src_name in repo.items():
            src = self.elements[src_name]
            slot_name = src.props["slot"]
            self.ctx.repo_slots[slot_name] = RepoSlot(
                slot_name, src.props["info"]
            )
        self._mark_feedback_pads(edges, repo)

    @staticmethod
    def _reachable(start: str, edges: dict[str, set[str]]) -> set[str]:
        seen = {start}
        todo = deque([start])
        while todo:
            for nbr in edges[todo.popleft()]:
                if nbr not in seen:
                    seen.add(nbr)
                    todo.append(nbr)
        return seen

    def _mark_feedback_pads(self, edges: dict[str, set[str]],
                            repo: dict[str, str]) -> None:
        """A combiner sink pad fed (upstream) by a reposrc whose paired
        reposink is reachable downstream of the combiner closes a loop."""
        combined = {n: set(e) for n, e in edges.items()}
        for sink_name, src_name in repo.items():
            combined[sink_name].add(src_name)
        rev: dict[str, set[str]] = {n: set() for n in edges}
        for n, outs in edges.items():
            for m in outs:
                rev[m].add(n)
        for el in self.elements.values():
            if not isinstance(el, SyncCombiner):
                continue
            downstream = self._reachable(el.name, combined)
            for idx, pad in enumerate(el.sink_pads):
                upstream = self._reachable(pad.peer.element.name, rev)
                for up in upstream:
                    upel = self.elements[up]
                    if isinstance(upel, RepoSource):
                        paired_sink = next(
                            s for s, r in repo.items() if r == up
                        )
                        if paired_sink in downstream:
                            el.feedback_pads.add(idx)
                            break

    # -- negotiation ---------------------------------------------------------

    def topo_order(self) -> list[Element]:
        edges = self.data_edges()
        indeg = {n: 0 for n in edges}
        for outs in edges.values():
            for m in outs:
                indeg[m] += 1
        todo = deque(sorted(n for n, d in indeg.items() if d == 0))
        order = []
        while todo:
            n = todo.popleft()
            order.append(self.elements[n])
            for m in sorted(edges[n]):
                indeg[m] -= 1
                if indeg[m] == 0:
                    todo.append(m)
        if len(order) != len(self.elements):
            raise GraphError("pipeline data links form a cycle")
        return order

    def negotiate(self, only_unset: bool = False) -> None:
        for el in self.topo_order():
            if only_unset and all(
                p.negotiated is not None for p in el.sink_pads + el.src_pads
            ):
                continue
            for pad in el.sink_pads:
                src_pad = pad.peer
                upstream = src_pad.negotiated
                if upstream is None:
                    raise NegotiationError(
                        f"{src_pad.full_name} has no caps to offer "
                        f"{pad.full_name}"
                    )
                chosen = None
                for template in pad.templates:
                    inter = caps_intersect(upstream, template)
                    if inter is not None:
                        chosen = inter
                        break
                if chosen is None:
                    raise NegotiationError(
                        f"cannot link {src_pad.full_name} to {pad.full_name}: "
                        f"{upstream.render()} does not match any template "
                        f"{[t.render() for t in pad.templates]}"
                    )
                if src_pad.filter_caps is not None:
                    inter = caps_intersect(chosen, src_pad.filter_caps)
                    if inter is None:
                        raise NegotiationError(
                            f"caps filter {src_pad.filter_caps.render()} on "
                            f"{src_pad.full_name} -> {pad.full_name} rejects "
                            f"{chosen.render()}"
                        )
                    chosen = inter
                fixed = fixate(chosen)
                if not fixed.is_fixed:
                    raise NegotiationError(
                        f"link {src_pad.full_name} -> {pad.full_name} did not "
                        f"fixate: {fixed.render()}"
                    )
                pad.negotiated = fixed
            try:
                el.configure()
            except TenspipeError:
                raise
            except Exception as exc:
                raise PipelineError(f"{el.name}: configure failed: {exc}") from exc


def export_dot(graph: BuiltGraph) -> str:
    """GraphViz rendering; stable (sorted) and caps-labeled when negotiated."""
    lines = ["digraph pipeline {", "  node [shape=box];"]
    for name in sorted(graph.elements):
        el = graph.elements[name]
        lines.append(f'  "{name}" [label="{el.KIND}\\n{name}"];')
    rendered = []
    for src_pad, dst_pad in graph.links:
        label = dst_pad.negotiated.render() if dst_pad.negotiated else ""
        rendered.append(
            (src_pad.element.name, dst_pad.element.name, src_pad.name,
             dst_pad.name, label)
        )
    for src, dst, sp, dp, label in sorted(rendered):
        attr = f' [label="{label}"]' if label else ""
        lines.append(f'  "{src}" -> "{dst}"{attr};')
    lines.append("}")
    return "\n".join(lines) + "\n"
