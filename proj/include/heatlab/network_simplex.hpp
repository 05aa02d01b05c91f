#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace heatlab::transport {

// Primal network simplex for the dense bipartite transportation problem:
// minimize sum c_ij f_ij subject to sum_j f_ij = supply_i, sum_i f_ij =
// demand_j, f >= 0. Costs and masses are doubles; pivoting uses a tolerance
// scaled to the largest cost. Supplies and demands must balance.
class TransportationSimplex {
  public:
    struct Flow {
        int source = 0;
        int sink = 0;
        double mass = 0.0;
    };

    struct Solution {
        double cost = 0.0;
        std::vector<Flow> flows;
    };

    // cost is row-major [ns x nt].
    static Solution solve(const std::vector<double>& supply, const std::vector<double>& demand,
                          const std::vector<double>& cost);
};

}  // namespace heatlab::transport
