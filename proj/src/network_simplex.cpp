#include "heatlab/network_simplex.hpp"

#include <algorithm>
#include <limits>

namespace heatlab::transport {

namespace {

// Spanning-tree bookkeeping. Real arcs are source -> sink; every node also
// owns an artificial arc to the root used for the initial basis.
struct Tree {
    int nodes = 0;                // ns + nt + 1 (root last)
    std::vector<int> parent;      // parent in the tree (root's parent = -1)
    std::vector<int> parc;        // arc id connecting node to parent
    std::vector<bool> up;         // true when the arc is oriented node -> parent
    std::vector<double> flow;     // flow on the parent arc, indexed by node
    std::vector<double> pi;       // node potentials
    std::vector<int> depth;
};

}  // namespace

TransportationSimplex::Solution TransportationSimplex::solve(const std::vector<double>& supply,
                                                             const std::vector<double>& demand,
                                                             const std::vector<double>& cost) {
    const int ns = static_cast<int>(supply.size());
    const int nt = static_cast<int>(demand.size());
    if (ns == 0 || nt == 0) throw std::invalid_argument("TransportationSimplex: empty side");
    if (static_cast<int>(cost.size()) != ns * nt)
        throw std::invalid_argument("TransportationSimplex: cost matrix size mismatch");
    double total_s = 0.0, total_d = 0.0;
    for (double v : supply) total_s += v;
    for (double v : demand) total_d += v;
    const double scale = std::max(total_s, total_d);
    if (std::abs(total_s - total_d) > 1e-9 * std::max(1.0, scale))
        throw std::invalid_argument("TransportationSimplex: unbalanced masses");

    double cmax = 0.0;
    for (double v : cost) cmax = std::max(cmax, std::abs(v));
    const double big = 4.0 * (cmax + 1.0);
    const double eps = 1e-13 * (cmax + 1.0);

    const int root = ns + nt;
    Tree tr;
    tr.nodes = ns + nt + 1;
    tr.parent.assign(static_cast<std::size_t>(tr.nodes), -1);
    tr.parc.assign(static_cast<std::size_t>(tr.nodes), -1);
    tr.up.assign(static_cast<std::size_t>(tr.nodes), true);
    tr.flow.assign(static_cast<std::size_t>(tr.nodes), 0.0);
    tr.pi.assign(static_cast<std::size_t>(tr.nodes), 0.0);
    tr.depth.assign(static_cast<std::size_t>(tr.nodes), 0);

    // Initial all-artificial basis: source -> root carrying the supply,
    // root -> sink carrying the demand. Reduced costs on tree arcs vanish.
    for (int i = 0; i < ns; ++i) {
        tr.parent[static_cast<std::size_t>(i)] = root;
        tr.up[static_cast<std::size_t>(i)] = true;  // arc i -> root
        tr.flow[static_cast<std::size_t>(i)] = supply[static_cast<std::size_t>(i)];
        tr.pi[static_cast<std::size_t>(i)] = big;
        tr.depth[static_cast<std::size_t>(i)] = 1;
    }
    for (int j = 0; j < nt; ++j) {
        const int v = ns + j;
        tr.parent[static_cast<std::size_t>(v)] = root;
        tr.up[static_cast<std::size_t>(v)] = false;  // arc root -> sink
        tr.flow[static_cast<std::size_t>(v)] = demand[static_cast<std::size_t>(j)];
        tr.pi[static_cast<std::size_t>(v)] = -big;
        tr.depth[static_cast<std::size_t>(v)] = 1;
    }

    // Basis flags for real arcs (arc id = i * nt + j).
    std::vector<std::uint8_t> in_tree(static_cast<std::size_t>(ns) * static_cast<std::size_t>(nt), 0);

    const long long narcs = static_cast<long long>(ns) * nt;
    const long long block = std::max<long long>(64, static_cast<long long>(std::sqrt(static_cast<double>(narcs))));
    long long scan_pos = 0;

    auto reduced_cost = [&](long long arc) {
        const int i = static_cast<int>(arc / nt);
        const int j = static_cast<int>(arc % nt);
        return cost[static_cast<std::size_t>(arc)] - tr.pi[static_cast<std::size_t>(i)] +
               tr.pi[static_cast<std::size_t>(ns + j)];
    };

    const long long max_pivots = 400LL * (ns + nt) + 400000LL;
    long long pivots = 0;

    // Scratch for the per-pivot potential refresh (first-child/next-sibling).
    std::vector<int> head(static_cast<std::size_t>(tr.nodes));
    std::vector<int> sibling(static_cast<std::size_t>(tr.nodes));
    std::vector<int> stack(static_cast<std::size_t>(tr.nodes));

    for (;;) {
        // Entering arc: best reduced cost within a scanning block.
        long long entering = -1;
        double best_rc = -eps;
        long long scanned = 0;
        long long pos = scan_pos;
        while (scanned < narcs) {
            const long long chunk = std::min(block, narcs - scanned);
            for (long long k = 0; k < chunk; ++k) {
                const long long arc = (pos + k) % narcs;
                if (in_tree[static_cast<std::size_t>(arc)]) continue;
                const double rc = reduced_cost(arc);
                if (rc < best_rc) {
                    best_rc = rc;
                    entering = arc;
                }
            }
            scanned += chunk;
            pos = (pos + chunk) % narcs;
            if (entering >= 0) break;
        }
        scan_pos = pos;
        if (entering < 0) break;  // optimal
        if (++pivots > max_pivots)
            throw std::runtime_error("TransportationSimplex: pivot limit exceeded");

        const int src = static_cast<int>(entering / nt);
        const int snk = ns + static_cast<int>(entering % nt);

        // Find the join of the two tree paths.
        int a = src, b = snk;
        while (a != b) {
            if (tr.depth[static_cast<std::size_t>(a)] >= tr.depth[static_cast<std::size_t>(b)])
                a = tr.parent[static_cast<std::size_t>(a)];
            else
                b = tr.parent[static_cast<std::size_t>(b)];
        }
        const int join = a;

        // theta = max flow shift around the cycle src -> snk (via the new arc)
        // then snk -> join -> src through the tree. On the src-side path flow
        // moves with arcs oriented toward the parent when up; on the snk side
        // the traversal is reversed.
        double theta = std::numeric_limits<double>::infinity();
        int leave_node = -1;       // node whose parent arc leaves
        bool leave_on_src_side = true;
        for (int v = src; v != join; v = tr.parent[static_cast<std::size_t>(v)]) {
            // Cycle direction here is v -> parent(v): arcs oriented up gain
            // flow... the new arc carries theta from src to snk, so the tree
            // path from snk back to src carries theta toward src; equivalently
            // walking src -> join the flow DECREASES on arcs oriented up.
            if (tr.up[static_cast<std::size_t>(v)]) {
                if (tr.flow[static_cast<std::size_t>(v)] < theta) {
                    theta = tr.flow[static_cast<std::size_t>(v)];
                    leave_node = v;
                    leave_on_src_side = true;
                }
            }
        }
        for (int v = snk; v != join; v = tr.parent[static_cast<std::size_t>(v)]) {
            // Walking snk -> join the cycle runs v -> parent(v) as well, but
            // the transported direction is join -> snk, so arcs oriented up
            // (v -> parent) GAIN flow and down arcs lose it.
            if (!tr.up[static_cast<std::size_t>(v)]) {
                if (tr.flow[static_cast<std::size_t>(v)] < theta) {
                    theta = tr.flow[static_cast<std::size_t>(v)];
                    leave_node = v;
                    leave_on_src_side = false;
                }
            }
        }

        // Apply the flow change around the cycle.
        for (int v = src; v != join; v = tr.parent[static_cast<std::size_t>(v)])
            tr.flow[static_cast<std::size_t>(v)] += tr.up[static_cast<std::size_t>(v)] ? -theta : theta;
        for (int v = snk; v != join; v = tr.parent[static_cast<std::size_t>(v)])
            tr.flow[static_cast<std::size_t>(v)] += tr.up[static_cast<std::size_t>(v)] ? theta : -theta;

        if (leave_node < 0) throw std::runtime_error("TransportationSimplex: unbounded cycle");

        // Re-root the detached subtree at the entering arc's endpoint on the
        // leaving side, reversing parent pointers along the path.
        const int attach_from = leave_on_src_side ? src : snk;   // new child end
        const int attach_to = leave_on_src_side ? snk : src;     // stays in main tree

        // Mark leaving arc out of the basis.
        if (tr.parc[static_cast<std::size_t>(leave_node)] >= 0)
            in_tree[static_cast<std::size_t>(tr.parc[static_cast<std::size_t>(leave_node)])] = 0;

        // Reverse the path attach_from -> ... -> leave_node.
        int prev = attach_to;
        int prev_arc = static_cast<int>(entering);
        bool prev_up = leave_on_src_side;  // entering arc: src -> snk. From the
                                           // subtree's perspective, the arc is
                                           // oriented child -> parent iff the
                                           // child end is the source.
        double prev_flow = theta;
        int cur = attach_from;
        for (;;) {
            const int nxt = tr.parent[static_cast<std::size_t>(cur)];
            const int nxt_arc = tr.parc[static_cast<std::size_t>(cur)];
            const bool nxt_up = tr.up[static_cast<std::size_t>(cur)];
            const double nxt_flow = tr.flow[static_cast<std::size_t>(cur)];

            tr.parent[static_cast<std::size_t>(cur)] = prev;
            tr.parc[static_cast<std::size_t>(cur)] = prev_arc;
            tr.up[static_cast<std::size_t>(cur)] = prev_up;
            tr.flow[static_cast<std::size_t>(cur)] = prev_flow;

            if (cur == leave_node) break;
            prev = cur;
            prev_arc = nxt_arc;
            prev_up = !nxt_up;  // reversing the parent relation flips orientation
            prev_flow = nxt_flow;
            cur = nxt;
        }
        in_tree[static_cast<std::size_t>(entering)] = 1;

        // Refresh depths and potentials by walking the tree from the root.
        // With <= 4001 nodes a full O(V) pass per pivot is acceptable.
        std::fill(head.begin(), head.end(), -1);
        for (int v = 0; v < tr.nodes; ++v) {
            const int pv = tr.parent[static_cast<std::size_t>(v)];
            if (pv < 0) continue;
            sibling[static_cast<std::size_t>(v)] = head[static_cast<std::size_t>(pv)];
            head[static_cast<std::size_t>(pv)] = v;
        }
        int top = 0;
        stack[0] = root;
        tr.depth[static_cast<std::size_t>(root)] = 0;
        tr.pi[static_cast<std::size_t>(root)] = 0.0;
        while (top >= 0) {
            const int v = stack[static_cast<std::size_t>(top--)];
            for (int w = head[static_cast<std::size_t>(v)]; w >= 0;
                 w = sibling[static_cast<std::size_t>(w)]) {
                tr.depth[static_cast<std::size_t>(w)] = tr.depth[static_cast<std::size_t>(v)] + 1;
                const int arc = tr.parc[static_cast<std::size_t>(w)];
                const double carc = arc >= 0 ? cost[static_cast<std::size_t>(arc)] : big;
                // rc = c - pi[tail] + pi[head] = 0 on tree arcs.
                if (tr.up[static_cast<std::size_t>(w)])
                    tr.pi[static_cast<std::size_t>(w)] = carc + tr.pi[static_cast<std::size_t>(v)];
                else
                    tr.pi[static_cast<std::size_t>(w)] = tr.pi[static_cast<std::size_t>(v)] - carc;
                stack[static_cast<std::size_t>(++top)] = w;
            }
        }
    }

    // Collect the solution: tree arcs that are real carry the flow.
    Solution sol;
    for (int v = 0; v < ns + nt; ++v) {
        const int arc = tr.parc[static_cast<std::size_t>(v)];
        if (arc < 0) {
            if (tr.flow[static_cast<std::size_t>(v)] > 1e-9 * std::max(1.0, scale))
                throw std::runtime_error("TransportationSimplex: infeasible (artificial flow left)");
            continue;
        }
        const double fl = tr.flow[static_cast<std::size_t>(v)];
        if (fl <= 0.0) continue;
        sol.flows.push_back({static_cast<int>(arc / nt), static_cast<int>(arc % nt), fl});
    }
    std::vector<double> parts(sol.flows.size());
    for (std::size_t k = 0; k < sol.flows.size(); ++k)
        parts[k] = sol.flows[k].mass *
                   cost[static_cast<std::size_t>(sol.flows[k].source) * static_cast<std::size_t>(nt) +
                        static_cast<std::size_t>(sol.flows[k].sink)];
    double acc = 0.0;
    for (double v : parts) acc += v;
    sol.cost = acc;
    return sol;
}

}  // namespace heatlab::transport
